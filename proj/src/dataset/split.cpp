#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "convmamba/dataset.hpp"
#include "convmamba/error.hpp"
#include "convmamba/rng.hpp"

namespace convmamba {
namespace {

void Finish(SplitResult& r, const std::vector<int>& labels) {
  std::sort(r.train.begin(), r.train.end());
  std::sort(r.test.begin(), r.test.end());
  const std::size_t n = labels.size();
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  r.achieved_test_fraction = n ? static_cast<double>(r.test.size()) / static_cast<double>(n) : 0.0;
  r.overall_positive_fraction = n ? pos / static_cast<double>(n) : 0.0;
  std::size_t test_pos = 0;
  for (std::size_t i : r.test) test_pos += labels[i] == 1;
  r.test_positive_fraction =
      r.test.empty() ? 0.0 : static_cast<double>(test_pos) / static_cast<double>(r.test.size());
}

}  // namespace

const char* SplitModeName(SplitMode mode) {
  return mode == SplitMode::kWindowStratified ? "window-stratified" : "record-grouped";
}

SplitMode ParseSplitMode(const std::string& name) {
  if (name == "window-stratified") return SplitMode::kWindowStratified;
  if (name == "record-grouped") return SplitMode::kRecordGrouped;
  Fail(ErrorKind::kConfig, "unknown split mode '" + name +
                               "' (expected window-stratified or record-grouped)");
}

SplitResult StratifiedSplit(const std::vector<int>& labels,
                            const std::vector<std::string>& groups,
                            double test_frac, SplitMode mode, std::uint64_t seed) {
  if (!(test_frac >= 0.0 && test_frac < 1.0)) {
    Fail(ErrorKind::kSplit, "test fraction must lie in [0, 1)");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) Fail(ErrorKind::kSplit, "labels must be 0 or 1");
  }
  SplitResult r;
  r.mode = mode;
  r.seed = seed;
  Rng rng(seed);

  if (mode == SplitMode::kWindowStratified) {
    for (int cls : {0, 1}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) members.push_back(i);
      }
      if (members.empty()) {
        Fail(ErrorKind::kSplit, "class " + std::to_string(cls) + " has no windows");
      }
      rng.Shuffle(std::span<std::size_t>(members));
      const auto n_test = static_cast<std::size_t>(
          std::llround(static_cast<double>(members.size()) * test_frac));
      r.test.insert(r.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
      r.train.insert(r.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    Finish(r, labels);
    return r;
  }

  if (groups.size() != labels.size()) {
    Fail(ErrorKind::kSplit, "record-grouped split needs one group per window");
  }
  struct Group {
    std::vector<std::size_t> members;
    std::size_t pos = 0;
    std::size_t neg = 0;
  };
  std::vector<Group> order;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = index.emplace(groups[i], order.size());
    if (inserted) order.emplace_back();
    Group& g = order[it->second];
    g.members.push_back(i);
    (labels[i] == 1 ? g.pos : g.neg) += 1;
  }
  rng.Shuffle(std::span<Group>(order));
  std::stable_sort(order.begin(), order.end(), [](const Group& a, const Group& b) {
    return a.members.size() > b.members.size();
  });

  std::size_t total_pos = 0, total_neg = 0;
  for (const auto& g : order) {
    total_pos += g.pos;
    total_neg += g.neg;
  }
  const double target_pos = std::round(static_cast<double>(total_pos) * test_frac);
  const double target_neg = std::round(static_cast<double>(total_neg) * test_frac);
  const double scale_pos = std::max<double>(1.0, static_cast<double>(total_pos));
  const double scale_neg = std::max<double>(1.0, static_cast<double>(total_neg));
  auto cost = [&](double pos, double neg) {
    return std::abs(target_pos - pos) / scale_pos + std::abs(target_neg - neg) / scale_neg;
  };
  double test_pos = 0.0, test_neg = 0.0;
  for (const auto& g : order) {
    const double with = cost(test_pos + static_cast<double>(g.pos), test_neg + static_cast<double>(g.neg));
    auto& side = with < cost(test_pos, test_neg) ? r.test : r.train;
    if (&side == &r.test) {
      test_pos += static_cast<double>(g.pos);
      test_neg += static_cast<double>(g.neg);
    }
    side.insert(side.end(), g.members.begin(), g.members.end());
  }
  Finish(r, labels);
  return r;
}

BalancedSampler::BalancedSampler(const std::vector<std::size_t>& indices,
                                 const std::vector<int>& labels, std::size_t batch_size,
                                 std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) Fail(ErrorKind::kSampler, "batch size must be positive");
  for (std::size_t i : indices) {
    if (i >= labels.size()) Fail(ErrorKind::kSampler, "window index out of range");
    (labels[i] == 1 ? positives_ : negatives_).push_back(i);
  }
  if (positives_.empty() || negatives_.empty()) {
    Fail(ErrorKind::kSampler, "balanced sampling needs both classes in the training set (" +
                                  std::to_string(positives_.size()) + " seizure, " +
                                  std::to_string(negatives_.size()) + " non-seizure)");
  }
  majority_count_ = std::max(positives_.size(), negatives_.size());
}

std::vector<std::size_t> BalancedSampler::EpochOrder(std::size_t epoch) const {
  Rng rng(seed_ + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) + 1));
  const bool pos_major = positives_.size() >= negatives_.size();
  std::vector<std::size_t> major = pos_major ? positives_ : negatives_;
  const std::vector<std::size_t>& minor_src = pos_major ? negatives_ : positives_;

  std::vector<std::size_t> order = major;
  std::vector<std::size_t> pass = minor_src;
  const std::size_t full = major.size() / minor_src.size();
  const std::size_t rem = major.size() % minor_src.size();
  for (std::size_t k = 0; k < full; ++k) {
    rng.Shuffle(std::span<std::size_t>(pass));
    order.insert(order.end(), pass.begin(), pass.end());
  }
  if (rem) {
    rng.Shuffle(std::span<std::size_t>(pass));
    order.insert(order.end(), pass.begin(), pass.begin() + static_cast<std::ptrdiff_t>(rem));
  }
  rng.Shuffle(std::span<std::size_t>(order));
  return order;
}

std::vector<std::vector<std::size_t>> BalancedSampler::Batches(std::size_t epoch) const {
  const auto order = EpochOrder(epoch);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size_) {
    const std::size_t end = std::min(order.size(), i + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace convmamba

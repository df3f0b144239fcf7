#include "convmamba/channels.hpp"

#include <cctype>
#include <unordered_map>

#include "convmamba/error.hpp"

namespace convmamba {

ChannelMap ChannelMap::Standard() {
  return ChannelMap{{"FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3",
                     "C3-P3", "P3-O1", "FP2-F4", "F4-C4", "C4-P4", "P4-O2",
                     "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ"}};
}

std::string NormalizeLabel(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (out.size() > 2 && out[out.size() - 2] == '-' &&
      (out.back() == '0' || out.back() == '1')) {
    out.resize(out.size() - 2);
  }
  return out;
}

Recording MapChannels(const Recording& rec, const ChannelMap& map) {
  std::unordered_map<std::string, std::size_t> first_row;
  for (std::size_t i = 0; i < rec.labels.size(); ++i) {
    first_row.emplace(NormalizeLabel(rec.labels[i]), i);
  }
  std::vector<std::size_t> rows;
  std::string missing;
  for (const auto& want : map.required) {
    auto it = first_row.find(NormalizeLabel(want));
    if (it == first_row.end()) {
      missing += (missing.empty() ? "" : ", ") + want;
    } else {
      rows.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    Fail(ErrorKind::kData, "recording '" + rec.source + "' lacks channels: " + missing);
  }
  const std::size_t n = rec.n_samples();
  Recording out;
  out.sample_rate = rec.sample_rate;
  out.source = rec.source;
  out.labels = map.required;
  out.data = Tensor(Shape{rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(rec.data.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                out.data.data().begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return out;
}

}  // namespace convmamba

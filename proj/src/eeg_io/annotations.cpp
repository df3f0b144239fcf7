#include "convmamba/annotations.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <regex>
#include <sstream>

#include "convmamba/error.hpp"

namespace convmamba {
namespace {

std::string_view TrimView(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double ParseSeconds(std::string_view s, std::size_t line) {
  s = TrimView(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    FailAtLine(ErrorKind::kParse, "malformed number '" + std::string(s) + "'", line);
  }
  return v;
}

long ParseCount(std::string_view s, std::size_t line) {
  s = TrimView(s);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    FailAtLine(ErrorKind::kParse, "malformed seizure count '" + std::string(s) + "'", line);
  }
  return v;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::vector<FileSeizures> ParseSummary(std::string_view text) {
  static const std::regex kFileName(R"(^File Name:\s*(\S.*)$)");
  static const std::regex kCount(R"(^Number of Seizures in File:\s*(.*)$)");
  static const std::regex kStart(R"(^Seizure(?:\s+\d+)?\s+Start Time:\s*(\S+)(?:\s*seconds?)?$)");
  static const std::regex kEnd(R"(^Seizure(?:\s+\d+)?\s+End Time:\s*(\S+)(?:\s*seconds?)?$)");

  std::vector<FileSeizures> out;
  std::optional<long> declared;
  std::optional<double> pending_start;
  std::size_t block_line = 0;

  auto close_block = [&](std::size_t line) {
    if (out.empty()) return;
    if (pending_start) {
      FailAtLine(ErrorKind::kParse, "seizure start without end time in '" +
                                        out.back().file_name + "'", line);
    }
    const long parsed = static_cast<long>(out.back().intervals.size());
    if (declared.value_or(0) != parsed) {
      FailAtLine(ErrorKind::kParse,
                 "'" + out.back().file_name + "' declares " +
                     std::to_string(declared.value_or(0)) + " seizures but lists " +
                     std::to_string(parsed),
                 block_line);
    }
  };

  const auto lines = SplitLines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string line(TrimView(lines[i]));
    std::smatch m;
    if (std::regex_match(line, m, kFileName)) {
      close_block(line_no);
      out.push_back({std::string(TrimView(m[1].str())), {}});
      declared.reset();
      pending_start.reset();
      block_line = line_no;
    } else if (std::regex_match(line, m, kCount)) {
      if (out.empty()) FailAtLine(ErrorKind::kParse, "seizure count before any File Name", line_no);
      declared = ParseCount(m[1].str(), line_no);
    } else if (std::regex_match(line, m, kStart)) {
      if (out.empty()) FailAtLine(ErrorKind::kParse, "seizure time before any File Name", line_no);
      if (!declared) FailAtLine(ErrorKind::kParse, "seizure time before the seizure count", line_no);
      if (pending_start) FailAtLine(ErrorKind::kParse, "two Start Times without an End Time", line_no);
      if (static_cast<long>(out.back().intervals.size()) >= *declared) {
        FailAtLine(ErrorKind::kParse, "more seizures than declared", line_no);
      }
      pending_start = ParseSeconds(m[1].str(), line_no);
    } else if (std::regex_match(line, m, kEnd)) {
      if (!pending_start) FailAtLine(ErrorKind::kParse, "End Time before Start Time", line_no);
      const double end = ParseSeconds(m[1].str(), line_no);
      if (end <= *pending_start) {
        FailAtLine(ErrorKind::kParse, "seizure end " + std::string(TrimView(m[1].str())) +
                                          " is not after its start", line_no);
      }
      if (*pending_start < 0.0) FailAtLine(ErrorKind::kParse, "negative seizure start", line_no);
      out.back().intervals.push_back({*pending_start, end, out.back().file_name});
      pending_start.reset();
    }
  }
  close_block(lines.size() + 1);
  return out;
}

std::vector<FileSeizures> ParseAnnotationCsv(std::string_view text) {
  const auto lines = SplitLines(text);
  if (lines.empty() || TrimView(lines[0]) != "file,start_s,end_s") {
    FailAtLine(ErrorKind::kParse, "annotation CSV must start with 'file,start_s,end_s'", 1);
  }
  std::vector<FileSeizures> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::string_view row = TrimView(lines[i]);
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      FailAtLine(ErrorKind::kParse, "expected three comma-separated fields", line_no);
    }
    const std::string file(TrimView(row.substr(0, c1)));
    if (file.empty()) FailAtLine(ErrorKind::kParse, "empty file name", line_no);
    const double start = ParseSeconds(row.substr(c1 + 1, c2 - c1 - 1), line_no);
    const double end = ParseSeconds(row.substr(c2 + 1), line_no);
    if (start < 0.0 || end <= start) {
      FailAtLine(ErrorKind::kParse, "interval must satisfy 0 <= start < end", line_no);
    }
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const FileSeizures& f) { return f.file_name == file; });
    if (it == out.end()) {
      out.push_back({file, {}});
      it = std::prev(out.end());
    }
    it->intervals.push_back({start, end, file});
  }
  return out;
}

std::string WriteAnnotationCsv(const std::vector<FileSeizures>& entries) {
  std::ostringstream out;
  out << "file,start_s,end_s\n";
  out.precision(17);
  for (const auto& f : entries)
    for (const auto& iv : f.intervals) out << f.file_name << ',' << iv.start_s << ',' << iv.end_s << '\n';
  return out.str();
}

double TotalSeizureSeconds(const std::vector<FileSeizures>& entries) {
  double total = 0.0;
  for (const auto& f : entries)
    for (const auto& iv : f.intervals) total += iv.end_s - iv.start_s;
  return total;
}

}  // namespace convmamba

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace convmamba {

struct SeizureInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string source;

  bool operator==(const SeizureInterval&) const = default;
};

struct FileSeizures {
  std::string file_name;
  std::vector<SeizureInterval> intervals;
};

// Parses the plain-text seizure summary used by the CHB-MIT corpus:
//
//   File Name: chb01_03.edf
//   Number of Seizures in File: 1
//   Seizure Start Time: 2996 seconds      (or "Seizure 1 Start Time: ...")
//   Seizure End Time: 3036 seconds
//
// Other lines are ignored. Errors (count mismatch, end <= start, end before
// start, malformed number) carry the 1-based line number.
std::vector<FileSeizures> ParseSummary(std::string_view text);

// CSV with the header "file,start_s,end_s"; rows are grouped by file in order
// of first appearance.
std::vector<FileSeizures> ParseAnnotationCsv(std::string_view text);
std::string WriteAnnotationCsv(const std::vector<FileSeizures>& entries);

double TotalSeizureSeconds(const std::vector<FileSeizures>& entries);

}  // namespace convmamba

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "convmamba/edf.hpp"

namespace convmamba {

// Required bipolar montage, in output row order.
struct ChannelMap {
  std::vector<std::string> required;

  // The 18 bipolar derivations, read row by row:
  // FP1-F7 F7-T7 T7-P7 P7-O1 FP1-F3 F3-C3 C3-P3 P3-O1 FP2-F4
  // F4-C4 C4-P4 P4-O2 FP2-F8 F8-T8 T8-P8 P8-O2 FZ-CZ CZ-PZ
  static ChannelMap Standard();
};

// Uppercase, drop whitespace, strip one trailing "-0" / "-1" duplicate
// suffix (so "T8-P8-0" and "t8-p8 " both become "T8-P8").
std::string NormalizeLabel(std::string_view label);

// Rows of rec reordered to map.required; extra channels dropped, duplicates
// resolved by first occurrence. Missing labels raise a data error that lists
// all of them.
Recording MapChannels(const Recording& rec, const ChannelMap& map);

}  // namespace convmamba

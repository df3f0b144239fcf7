#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "convmamba/tensor.hpp"

namespace convmamba {

struct EdfSignalHeader {
  std::string label;          // 16 chars
  std::string transducer;     // 80
  std::string physical_unit;  // 8
  double physical_min = 0.0;  // 8
  double physical_max = 0.0;  // 8
  std::int64_t digital_min = 0;  // 8
  std::int64_t digital_max = 0;  // 8
  std::string prefilter;      // 80
  std::int64_t samples_per_record = 0;  // 8
  std::string reserved;       // 32

  bool operator==(const EdfSignalHeader&) const = default;
};

struct EdfHeader {
  std::string version = "0";  // 8
  std::string patient_id;     // 80
  std::string recording_id;   // 80
  std::string start_date = "01.01.00";  // 8, dd.mm.yy
  std::string start_time = "00.00.00";  // 8, hh.mm.ss
  std::int64_t header_bytes = 256;      // 8
  std::string reserved;       // 44
  // -1 in a file means "unknown"; the parser replaces it with the count
  // implied by the file size.
  std::int64_t n_records = 0;           // 8
  double record_duration_s = 1.0;       // 8
  std::vector<EdfSignalHeader> signals; // count: 4 chars

  std::size_t n_signals() const { return signals.size(); }
  // samples_per_record / record_duration_s of signal i.
  double SampleRate(std::size_t i) const;
  bool operator==(const EdfHeader&) const = default;
};

// Decoded file: digital samples per signal, record by record concatenated.
struct EdfFile {
  EdfHeader header;
  std::vector<std::vector<std::int16_t>> samples;
};

// Linear calibration; endpoints map exactly.
double PhysicalScale(std::int64_t digital, const EdfSignalHeader& sig);
// Inverse calibration rounded to the nearest digital level and clamped.
std::int16_t DigitalLevel(double physical, const EdfSignalHeader& sig);

// Errors are parse errors carrying the byte offset of the offending field or
// record.
EdfFile ParseEdf(std::span<const std::uint8_t> bytes);
EdfFile ReadEdf(const std::filesystem::path& path);

// Bit-exact inverse of ParseEdf. header_bytes is recomputed; samples outside
// [digital_min, digital_max] are range errors.
std::vector<std::uint8_t> WriteEdf(const EdfHeader& header,
                                   const std::vector<std::vector<std::int16_t>>& samples);

struct Recording {
  std::vector<std::string> labels;
  double sample_rate = 0.0;
  Tensor data;  // [channels x samples], physical units
  std::string source;

  std::size_t n_channels() const { return labels.size(); }
  std::size_t n_samples() const { return data.rank() == 2 ? data.dim(1) : 0; }
};

// Physical-unit recording of the signals sharing the first signal's sample
// rate; signals at other rates are dropped.
Recording ToRecording(const EdfFile& edf, std::string source);

}  // namespace convmamba

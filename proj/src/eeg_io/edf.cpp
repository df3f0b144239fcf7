#include "convmamba/edf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "convmamba/binary_io.hpp"
#include "convmamba/error.hpp"

namespace convmamba {
namespace {

constexpr std::size_t kFixedHeader = 256;
constexpr std::size_t kPerSignalHeader = 256;

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(' ');
  return s.substr(b, e - b + 1);
}

class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string_view Field(std::size_t offset, std::size_t width) const {
    if (offset + width > bytes_.size()) {
      FailAtOffset(ErrorKind::kParse, "header field runs past end of file", offset);
    }
    return {reinterpret_cast<const char*>(bytes_.data() + offset), width};
  }

  std::string Text(std::size_t offset, std::size_t width) const {
    return std::string(Trim(Field(offset, width)));
  }

  std::int64_t Integer(std::size_t offset, std::size_t width, const char* name) const {
    const std::string_view s = Trim(Field(offset, width));
    std::int64_t v = 0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      FailAtOffset(ErrorKind::kParse,
                   std::string("non-numeric ") + name + " field '" + std::string(s) + "'",
                   offset);
    }
    return v;
  }

  double Real(std::size_t offset, std::size_t width, const char* name) const {
    const std::string_view s = Trim(Field(offset, width));
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      FailAtOffset(ErrorKind::kParse,
                   std::string("non-numeric ") + name + " field '" + std::string(s) + "'",
                   offset);
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
};

void PutText(ByteWriter& w, std::string_view text, std::size_t width, const char* name) {
  if (text.size() > width) {
    Fail(ErrorKind::kRange, std::string(name) + " '" + std::string(text) +
                                "' exceeds " + std::to_string(width) + " characters");
  }
  for (char c : text) {
    if (static_cast<unsigned char>(c) < 32 || static_cast<unsigned char>(c) > 126) {
      Fail(ErrorKind::kRange, std::string(name) + " must be printable ASCII");
    }
  }
  w.PutBytes(text);
  for (std::size_t i = text.size(); i < width; ++i) w.PutU8(' ');
}

void PutInteger(ByteWriter& w, std::int64_t v, std::size_t width, const char* name) {
  PutText(w, std::to_string(v), width, name);
}

// Shortest decimal text that parses back to v and fits the field.
void PutReal(ByteWriter& w, double v, std::size_t width, const char* name) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string text(buf, end);
  if (text.size() > width) {
    Fail(ErrorKind::kRange, std::string(name) + " value " + text +
                                " has no exact " + std::to_string(width) +
                                "-character representation");
  }
  PutText(w, text, width, name);
}

}  // namespace

double EdfHeader::SampleRate(std::size_t i) const {
  return static_cast<double>(signals.at(i).samples_per_record) / record_duration_s;
}

double PhysicalScale(std::int64_t digital, const EdfSignalHeader& sig) {
  if (digital == sig.digital_min) return sig.physical_min;
  if (digital == sig.digital_max) return sig.physical_max;
  const double span_d = static_cast<double>(sig.digital_max - sig.digital_min);
  const double span_p = sig.physical_max - sig.physical_min;
  return sig.physical_min + static_cast<double>(digital - sig.digital_min) * span_p / span_d;
}

std::int16_t DigitalLevel(double physical, const EdfSignalHeader& sig) {
  const double span_d = static_cast<double>(sig.digital_max - sig.digital_min);
  const double span_p = sig.physical_max - sig.physical_min;
  double d = static_cast<double>(sig.digital_min) + (physical - sig.physical_min) * span_d / span_p;
  d = std::clamp(std::round(d), static_cast<double>(sig.digital_min),
                 static_cast<double>(sig.digital_max));
  return static_cast<std::int16_t>(d);
}

EdfFile ParseEdf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeader) {
    FailAtOffset(ErrorKind::kParse,
                 "file has " + std::to_string(bytes.size()) +
                     " bytes, shorter than the 256-byte fixed header",
                 bytes.size());
  }
  HeaderCursor cur(bytes);
  EdfFile edf;
  EdfHeader& h = edf.header;
  h.version = cur.Text(0, 8);
  h.patient_id = cur.Text(8, 80);
  h.recording_id = cur.Text(88, 80);
  h.start_date = cur.Text(168, 8);
  h.start_time = cur.Text(176, 8);
  h.header_bytes = cur.Integer(184, 8, "header bytes");
  h.reserved = cur.Text(192, 44);
  h.n_records = cur.Integer(236, 8, "number of records");
  h.record_duration_s = cur.Real(244, 8, "record duration");
  const std::int64_t ns = cur.Integer(252, 4, "number of signals");

  if (ns < 1) FailAtOffset(ErrorKind::kParse, "number of signals must be positive", 252);
  if (h.header_bytes != static_cast<std::int64_t>(kFixedHeader + kPerSignalHeader * ns)) {
    FailAtOffset(ErrorKind::kParse,
                 "header bytes " + std::to_string(h.header_bytes) + " != 256 + 256 * " +
                     std::to_string(ns),
                 184);
  }
  if (!(h.record_duration_s > 0.0)) {
    FailAtOffset(ErrorKind::kParse, "record duration must be positive", 244);
  }
  if (h.n_records < -1) FailAtOffset(ErrorKind::kParse, "negative number of records", 236);
  const auto n = static_cast<std::size_t>(ns);
  if (bytes.size() < kFixedHeader + kPerSignalHeader * n) {
    FailAtOffset(ErrorKind::kParse, "signal headers truncated", bytes.size());
  }

  auto at = [n](std::size_t field_base, std::size_t width, std::size_t i) {
    return kFixedHeader + field_base * n + width * i;
  };
  h.signals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    EdfSignalHeader& s = h.signals[i];
    s.label = cur.Text(at(0, 16, i), 16);
    s.transducer = cur.Text(at(16, 80, i), 80);
    s.physical_unit = cur.Text(at(96, 8, i), 8);
    s.physical_min = cur.Real(at(104, 8, i), 8, "physical minimum");
    s.physical_max = cur.Real(at(112, 8, i), 8, "physical maximum");
    s.digital_min = cur.Integer(at(120, 8, i), 8, "digital minimum");
    s.digital_max = cur.Integer(at(128, 8, i), 8, "digital maximum");
    s.prefilter = cur.Text(at(136, 80, i), 80);
    s.samples_per_record = cur.Integer(at(216, 8, i), 8, "samples per record");
    s.reserved = cur.Text(at(224, 32, i), 32);
    if (s.digital_min >= s.digital_max) {
      FailAtOffset(ErrorKind::kParse, "digital minimum must be below maximum for '" + s.label + "'",
                   at(120, 8, i));
    }
    if (s.digital_min < INT16_MIN || s.digital_max > INT16_MAX) {
      FailAtOffset(ErrorKind::kParse, "digital range exceeds 16 bits for '" + s.label + "'",
                   at(120, 8, i));
    }
    if (s.physical_min == s.physical_max) {
      FailAtOffset(ErrorKind::kParse, "physical minimum equals maximum for '" + s.label + "'",
                   at(104, 8, i));
    }
    if (s.samples_per_record <= 0) {
      FailAtOffset(ErrorKind::kParse, "samples per record must be positive for '" + s.label + "'",
                   at(216, 8, i));
    }
  }

  std::size_t record_samples = 0;
  for (const auto& s : h.signals) record_samples += static_cast<std::size_t>(s.samples_per_record);
  const std::size_t record_bytes = 2 * record_samples;
  const std::size_t data_start = static_cast<std::size_t>(h.header_bytes);
  const std::size_t data_len = bytes.size() - data_start;

  if (h.n_records == -1) {
    if (data_len % record_bytes != 0) {
      FailAtOffset(ErrorKind::kParse, "truncated data record",
                   data_start + (data_len / record_bytes) * record_bytes);
    }
    h.n_records = static_cast<std::int64_t>(data_len / record_bytes);
  }
  const auto n_records = static_cast<std::size_t>(h.n_records);
  if (data_len < n_records * record_bytes) {
    FailAtOffset(ErrorKind::kParse,
                 "truncated data record " + std::to_string(data_len / record_bytes) + " of " +
                     std::to_string(n_records),
                 data_start + (data_len / record_bytes) * record_bytes);
  }

  edf.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    edf.samples[i].reserve(n_records * static_cast<std::size_t>(h.signals[i].samples_per_record));
  }
  std::size_t pos = data_start;
  for (std::size_t r = 0; r < n_records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto count = static_cast<std::size_t>(h.signals[i].samples_per_record);
      auto& out = edf.samples[i];
      for (std::size_t k = 0; k < count; ++k, pos += 2) {
        const auto raw = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        out.push_back(static_cast<std::int16_t>(raw));
      }
    }
  }
  return edf;
}

EdfFile ReadEdf(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return ParseEdf(bytes);
}

std::vector<std::uint8_t> WriteEdf(const EdfHeader& header,
                                   const std::vector<std::vector<std::int16_t>>& samples) {
  const std::size_t n = header.signals.size();
  if (n == 0) Fail(ErrorKind::kRange, "EDF needs at least one signal");
  if (samples.size() != n) {
    Fail(ErrorKind::kDimension, std::to_string(samples.size()) + " sample vectors for " +
                                    std::to_string(n) + " signals");
  }
  if (header.n_records < 0) Fail(ErrorKind::kRange, "number of records must be known");
  const auto n_records = static_cast<std::size_t>(header.n_records);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = header.signals[i];
    if (s.digital_min >= s.digital_max || s.physical_min == s.physical_max ||
        s.samples_per_record <= 0 || s.digital_min < INT16_MIN || s.digital_max > INT16_MAX) {
      Fail(ErrorKind::kRange, "invalid calibration or record size for '" + s.label + "'");
    }
    if (samples[i].size() != n_records * static_cast<std::size_t>(s.samples_per_record)) {
      Fail(ErrorKind::kDimension, "signal '" + s.label + "' has " +
                                      std::to_string(samples[i].size()) + " samples, expected " +
                                      std::to_string(n_records * s.samples_per_record));
    }
    for (std::int16_t v : samples[i]) {
      if (v < s.digital_min || v > s.digital_max) {
        Fail(ErrorKind::kRange, "sample " + std::to_string(v) + " of '" + s.label +
                                    "' outside digital range");
      }
    }
  }

  ByteWriter w;
  PutText(w, header.version, 8, "version");
  PutText(w, header.patient_id, 80, "patient id");
  PutText(w, header.recording_id, 80, "recording id");
  PutText(w, header.start_date, 8, "start date");
  PutText(w, header.start_time, 8, "start time");
  PutInteger(w, static_cast<std::int64_t>(kFixedHeader + kPerSignalHeader * n), 8, "header bytes");
  PutText(w, header.reserved, 44, "reserved");
  PutInteger(w, header.n_records, 8, "number of records");
  PutReal(w, header.record_duration_s, 8, "record duration");
  PutInteger(w, static_cast<std::int64_t>(n), 4, "number of signals");
  for (const auto& s : header.signals) PutText(w, s.label, 16, "label");
  for (const auto& s : header.signals) PutText(w, s.transducer, 80, "transducer");
  for (const auto& s : header.signals) PutText(w, s.physical_unit, 8, "physical unit");
  for (const auto& s : header.signals) PutReal(w, s.physical_min, 8, "physical minimum");
  for (const auto& s : header.signals) PutReal(w, s.physical_max, 8, "physical maximum");
  for (const auto& s : header.signals) PutInteger(w, s.digital_min, 8, "digital minimum");
  for (const auto& s : header.signals) PutInteger(w, s.digital_max, 8, "digital maximum");
  for (const auto& s : header.signals) PutText(w, s.prefilter, 80, "prefilter");
  for (const auto& s : header.signals) PutInteger(w, s.samples_per_record, 8, "samples per record");
  for (const auto& s : header.signals) PutText(w, s.reserved, 32, "signal reserved");

  for (std::size_t r = 0; r < n_records; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto count = static_cast<std::size_t>(header.signals[i].samples_per_record);
      for (std::size_t k = 0; k < count; ++k) {
        w.PutU16(static_cast<std::uint16_t>(samples[i][r * count + k]));
      }
    }
  }
  return w.Take();
}

Recording ToRecording(const EdfFile& edf, std::string source) {
  const EdfHeader& h = edf.header;
  Recording rec;
  rec.source = std::move(source);
  if (h.signals.empty()) return rec;
  const std::int64_t spr = h.signals.front().samples_per_record;
  rec.sample_rate = h.SampleRate(0);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < h.signals.size(); ++i) {
    if (h.signals[i].samples_per_record == spr) keep.push_back(i);
  }
  const std::size_t n_samples = edf.samples[keep.front()].size();
  rec.data = Tensor(Shape{keep.size(), n_samples});
  for (std::size_t row = 0; row < keep.size(); ++row) {
    const std::size_t i = keep[row];
    rec.labels.push_back(h.signals[i].label);
    const auto& src = edf.samples[i];
    for (std::size_t t = 0; t < n_samples; ++t) {
      rec.data[row * n_samples + t] = PhysicalScale(src[t], h.signals[i]);
    }
  }
  return rec;
}

}  // namespace convmamba

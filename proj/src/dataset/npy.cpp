#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "convmamba/binary_io.hpp"
#include "convmamba/dataset.hpp"
#include "convmamba/error.hpp"

namespace convmamba {
namespace {

constexpr std::string_view kNpyMagic("\x93NUMPY", 6);

std::string ShapeTuple(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    s += (shape.size() == 1 || i + 1 < shape.size()) ? "," : "";
    if (i + 1 < shape.size()) s += ' ';
  }
  return s + ")";
}

ByteWriter NpyHeader(const Shape& shape, std::string_view descr) {
  std::string dict = "{'descr': '" + std::string(descr) +
                     "', 'fortran_order': False, 'shape': " + ShapeTuple(shape) + ", }";
  // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  ByteWriter w;
  w.PutBytes(kNpyMagic);
  w.PutU8(1);
  w.PutU8(0);
  w.PutU16(static_cast<std::uint16_t>(dict.size()));
  w.PutBytes(dict);
  return w;
}

}  // namespace

std::vector<std::uint8_t> EncodeNpy(const Shape& shape, std::span<const double> values) {
  if (ShapeNumel(shape) != values.size()) Fail(ErrorKind::kDimension, "npy shape/value count mismatch");
  ByteWriter w = NpyHeader(shape, "<f8");
  for (double v : values) w.PutF64(v);
  return w.Take();
}

std::vector<std::uint8_t> EncodeNpy(const Shape& shape, std::span<const std::int64_t> values) {
  if (ShapeNumel(shape) != values.size()) Fail(ErrorKind::kDimension, "npy shape/value count mismatch");
  ByteWriter w = NpyHeader(shape, "<i8");
  for (std::int64_t v : values) w.PutU64(static_cast<std::uint64_t>(v));
  return w.Take();
}

NpyArray DecodeNpy(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 10 || r.Bytes(6, "magic") != kNpyMagic) {
    FailAtOffset(ErrorKind::kFormat, "bad NPY magic", 0);
  }
  const auto major = r.Bytes(1, "version")[0];
  const auto minor = r.Bytes(1, "version")[0];
  if (major != 1 || minor != 0) FailAtOffset(ErrorKind::kFormat, "unsupported NPY version", 6);
  const std::size_t header_len = r.U16("header length");
  const std::string header(r.Bytes(header_len, "header"));

  static const std::regex kDescr(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex kOrder(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex kShape(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  NpyArray out;
  if (!std::regex_search(header, m, kDescr)) FailAtOffset(ErrorKind::kFormat, "NPY header lacks descr", 10);
  out.descr = m[1].str();
  if (out.descr != "<f8" && out.descr != "<i8") {
    FailAtOffset(ErrorKind::kFormat, "unsupported dtype '" + out.descr + "'", 10);
  }
  if (!std::regex_search(header, m, kOrder) || m[1].str() != "False") {
    FailAtOffset(ErrorKind::kFormat, "NPY header must declare fortran_order False", 10);
  }
  if (!std::regex_search(header, m, kShape)) FailAtOffset(ErrorKind::kFormat, "NPY header lacks shape", 10);
  std::stringstream dims(m[1].str());
  std::string item;
  while (std::getline(dims, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(' ');
    std::size_t d = 0;
    const auto [ptr, ec] = std::from_chars(item.data() + b, item.data() + e + 1, d);
    if (ec != std::errc() || ptr != item.data() + e + 1) {
      FailAtOffset(ErrorKind::kFormat, "bad NPY shape entry '" + item + "'", 10);
    }
    out.shape.push_back(d);
  }
  const std::size_t n = ShapeNumel(out.shape);
  if (r.remaining() != 8 * n) {
    FailAtOffset(ErrorKind::kFormat,
                 "NPY payload has " + std::to_string(r.remaining()) + " bytes, shape " +
                     ShapeString(out.shape) + " needs " + std::to_string(8 * n),
                 r.offset());
  }
  if (out.descr == "<f8") {
    out.f64.resize(n);
    for (double& v : out.f64) v = r.F64("value");
  } else {
    out.i64.resize(n);
    for (auto& v : out.i64) v = static_cast<std::int64_t>(r.U64("value"));
  }
  return out;
}

void SaveWindows(const std::filesystem::path& dir, const WindowedDataset& ds) {
  ds.Validate();
  std::filesystem::create_directories(dir);
  WriteFileBytes(dir / "data.npy", EncodeNpy(Shape{ds.size(), ds.channels, ds.window_len}, ds.data));
  std::vector<std::int64_t> labels(ds.labels.begin(), ds.labels.end());
  WriteFileBytes(dir / "labels.npy", EncodeNpy(Shape{ds.size()}, labels));
  std::ostringstream csv;
  csv << "index,source,patient,start_sample,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    csv << i << ',' << ds.info[i].source << ',' << ds.info[i].patient << ','
        << ds.info[i].start_sample << ',' << ds.labels[i] << '\n';
  }
  WriteTextFile(dir / "windows.csv", csv.str());
}

WindowedDataset LoadWindows(const std::filesystem::path& dir) {
  const NpyArray data = DecodeNpy(ReadFileBytes(dir / "data.npy"));
  const NpyArray labels = DecodeNpy(ReadFileBytes(dir / "labels.npy"));
  if (data.descr != "<f8" || data.shape.size() != 3) {
    Fail(ErrorKind::kFormat, "data.npy must be a 3-D float64 array");
  }
  if (labels.descr != "<i8" || labels.shape != Shape{data.shape[0]}) {
    Fail(ErrorKind::kFormat, "labels.npy shape " + ShapeString(labels.shape) +
                                 " does not match data.npy " + ShapeString(data.shape));
  }
  WindowedDataset ds;
  ds.channels = data.shape[1];
  ds.window_len = data.shape[2];
  ds.data = data.f64;
  for (auto v : labels.i64) {
    if (v != 0 && v != 1) Fail(ErrorKind::kFormat, "labels.npy holds a label other than 0/1");
    ds.labels.push_back(static_cast<int>(v));
  }

  const std::string csv = ReadTextFile(dir / "windows.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  if (line != "index,source,patient,start_sample,label") {
    Fail(ErrorKind::kFormat, "windows.csv has an unexpected header");
  }
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) Fail(ErrorKind::kFormat, "windows.csv row has " + std::to_string(f.size()) + " fields");
    ds.info.push_back(WindowInfo{f[1], f[2], static_cast<std::size_t>(std::stoull(f[3]))});
  }
  if (ds.info.size() != ds.labels.size()) {
    Fail(ErrorKind::kFormat, "windows.csv lists " + std::to_string(ds.info.size()) +
                                 " windows, arrays hold " + std::to_string(ds.labels.size()));
  }
  return ds;
}

}  // namespace convmamba

#include "convmamba/run_config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "convmamba/binary_io.hpp"
#include "convmamba/error.hpp"

namespace convmamba {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value, const char* want) {
  Fail(ErrorKind::kConfig, "invalid value '" + std::string(value) + "' for " +
                               std::string(key) + " (expected " + want + ")");
}

std::size_t ToSize(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "a non-negative integer");
  return out;
}

std::uint64_t ToU64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "a non-negative integer");
  return out;
}

double ToDouble(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "a number");
  return out;
}

bool ToBool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  BadValue(key, v, "true or false");
}

std::string FromDouble(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string ConvStackString(const std::vector<ConvStage>& stack) {
  std::string s;
  for (const auto& st : stack) {
    if (!s.empty()) s += ',';
    s += std::to_string(st.out_channels) + ':' + std::to_string(st.kernel) + ':' +
         std::to_string(st.pool);
  }
  return s;
}

std::vector<ConvStage> ParseConvStack(std::string_view key, std::string_view v) {
  std::vector<ConvStage> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = std::min(v.find(',', pos), v.size());
    const auto item = Trim(v.substr(pos, comma - pos));
    const auto c1 = item.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : item.find(':', c1 + 1);
    if (c2 == std::string_view::npos) BadValue(key, v, "out:kernel:pool[,out:kernel:pool...]");
    out.push_back({ToSize(key, item.substr(0, c1)), ToSize(key, item.substr(c1 + 1, c2 - c1 - 1)),
                   ToSize(key, item.substr(c2 + 1))});
    pos = comma + 1;
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
  bool quoted = false;
};

#define CM_SIZE(key, member)                                                              \
  {key, Field{[](RunConfig& c, std::string_view k, std::string_view v) {                  \
                c.member = ToSize(k, v);                                                  \
              },                                                                          \
              [](const RunConfig& c) { return std::to_string(c.member); }}}
#define CM_DOUBLE(key, member)                                                            \
  {key, Field{[](RunConfig& c, std::string_view k, std::string_view v) {                  \
                c.member = ToDouble(k, v);                                                \
              },                                                                          \
              [](const RunConfig& c) { return FromDouble(c.member); }}}
#define CM_BOOL(key, member)                                                              \
  {key, Field{[](RunConfig& c, std::string_view k, std::string_view v) {                  \
                c.member = ToBool(k, v);                                                  \
              },                                                                          \
              [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define CM_STRING(key, member)                                                            \
  {key, Field{[](RunConfig& c, std::string_view, std::string_view v) {                    \
                c.member = std::string(v);                                                \
              },                                                                          \
              [](const RunConfig& c) { return c.member; }, true}}

const std::map<std::string, Field, std::less<>>& Fields() {
  static const std::map<std::string, Field, std::less<>> fields = {
      {"seed", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                       c.seed = ToU64(k, v);
                       c.train.seed = c.seed;
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }}},
      CM_SIZE("threads", threads),
      CM_SIZE("model.in_channels", model.in_channels),
      CM_SIZE("model.window_len", model.window_len),
      CM_SIZE("model.d_model", model.d_model),
      CM_SIZE("model.d_state", model.mamba.d_state),
      CM_SIZE("model.d_conv", model.mamba.d_conv),
      CM_SIZE("model.expand", model.mamba.expand),
      CM_SIZE("model.dt_rank", model.mamba.dt_rank),
      CM_SIZE("model.n_layers", model.n_mamba_layers),
      CM_BOOL("model.attention", model.attention.enabled),
      CM_SIZE("model.attention_heads", model.attention.heads),
      {"model.conv_stack",
       Field{[](RunConfig& c, std::string_view k, std::string_view v) {
               c.model.conv_stack = ParseConvStack(k, v);
             },
             [](const RunConfig& c) { return ConvStackString(c.model.conv_stack); }, true}},
      CM_SIZE("model.fc_hidden", model.fc_hidden),
      CM_DOUBLE("model.dropout", model.dropout_p),
      CM_SIZE("model.n_classes", model.n_classes),
      {"model.temporal",
       Field{[](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "mamba") {
                 c.model.temporal = TemporalBlock::kMamba;
               } else if (v == "dense") {
                 c.model.temporal = TemporalBlock::kDense;
               } else {
                 BadValue(k, v, "mamba or dense");
               }
             },
             [](const RunConfig& c) {
               return std::string(c.model.temporal == TemporalBlock::kMamba ? "mamba" : "dense");
             },
             true}},
      CM_DOUBLE("window.window_s", window.window_s),
      CM_DOUBLE("window.stride_s", window.stride_s),
      CM_DOUBLE("window.sample_rate", window.sample_rate),
      CM_DOUBLE("window.threshold", window.threshold),
      CM_SIZE("train.epochs", train.epochs),
      CM_SIZE("train.batch_size", train.batch_size),
      CM_DOUBLE("train.lr", train.lr),
      {"train.eval_scan",
       Field{[](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "sequential") {
                 c.train.eval_scan = ScanKind::kSequential;
               } else if (v == "parallel") {
                 c.train.eval_scan = ScanKind::kParallel;
               } else {
                 BadValue(k, v, "sequential or parallel");
               }
             },
             [](const RunConfig& c) {
               return std::string(c.train.eval_scan == ScanKind::kSequential ? "sequential"
                                                                              : "parallel");
             },
             true}},
      CM_DOUBLE("split.test_frac", test_frac),
      {"split.mode",
       Field{[](RunConfig& c, std::string_view k, std::string_view v) {
               try {
                 c.split_mode = ParseSplitMode(std::string(v));
               } catch (const Error&) {
                 BadValue(k, v, "window-stratified or record-grouped");
               }
             },
             [](const RunConfig& c) { return std::string(SplitModeName(c.split_mode)); }, true}},
      CM_STRING("paths.data_dir", data_dir),
      CM_STRING("paths.annotations", annotations),
      CM_STRING("paths.dataset", dataset),
      CM_STRING("paths.split", split),
      CM_STRING("paths.checkpoint", checkpoint),
      CM_STRING("paths.out", out),
      CM_SIZE("synth.n_windows", synth.n_windows),
      CM_SIZE("synth.n_positive", synth.n_positive),
      CM_SIZE("synth.channels", synth.channels),
      CM_SIZE("synth.window_len", synth.window_len),
      CM_DOUBLE("synth.sample_rate", synth.sample_rate),
      CM_DOUBLE("synth.burst_hz", synth.burst_hz),
      CM_DOUBLE("synth.burst_s", synth.burst_s),
      CM_DOUBLE("synth.amplitude", synth.amplitude),
      CM_DOUBLE("synth.noise_std", synth.noise_std),
      CM_SIZE("bench.repetitions", bench_repetitions),
      CM_BOOL("bench.baseline", bench_baseline),
      CM_SIZE("bench.scan_length", bench_scan_length),
      CM_SIZE("gradcheck.op_seeds", gradcheck_op_seeds),
      CM_SIZE("gradcheck.model_seeds", gradcheck_model_seeds),
  };
  return fields;
}

#undef CM_SIZE
#undef CM_DOUBLE
#undef CM_BOOL
#undef CM_STRING

std::string Quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

// Value text of "key = value", with quotes and trailing comments removed.
std::string Unquote(std::string_view raw, std::size_t line) {
  raw = Trim(raw);
  if (!raw.empty() && raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
      out += raw[i];
    }
    if (i >= raw.size()) FailAtLine(ErrorKind::kConfig, "unterminated string", line);
    const auto rest = Trim(raw.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') {
      FailAtLine(ErrorKind::kConfig, "unexpected text after string", line);
    }
    return out;
  }
  const auto hash = raw.find('#');
  return std::string(Trim(raw.substr(0, hash)));
}

}  // namespace

void RunConfig::Set(std::string_view key, std::string_view value) {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  if (it == fields.end()) Fail(ErrorKind::kConfig, "unknown config key '" + std::string(key) + "'");
  it->second.set(*this, key, Trim(value));
}

std::string RunConfig::Get(std::string_view key) const {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  if (it == fields.end()) Fail(ErrorKind::kConfig, "unknown config key '" + std::string(key) + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : Fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::Merge(std::string_view text) {
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = std::min(text.find('\n', pos), text.size());
    const auto line = Trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) FailAtLine(ErrorKind::kConfig, "unclosed section header", line_no);
      section = std::string(Trim(line.substr(1, close - 1)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) FailAtLine(ErrorKind::kConfig, "expected key = value", line_no);
    const std::string key = std::string(Trim(line.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      Set(full, Unquote(line.substr(eq + 1), line_no));
    } catch (const Error& e) {
      if (e.line()) throw;
      FailAtLine(ErrorKind::kConfig, e.what(), line_no);
    }
  }
}

RunConfig RunConfig::Parse(std::string_view text) {
  RunConfig c;
  c.Merge(text);
  return c;
}

std::string RunConfig::ToToml() const {
  std::ostringstream out;
  std::string section = "";
  // Top-level keys first, then sections in key order.
  for (const auto& [key, field] : Fields()) {
    if (key.find('.') != std::string::npos) continue;
    out << key << " = " << (field.quoted ? Quote(field.get(*this)) : field.get(*this)) << '\n';
  }
  for (const auto& [key, field] : Fields()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    const std::string value = field.get(*this);
    out << key.substr(dot + 1) << " = " << (field.quoted ? Quote(value) : value) << '\n';
  }
  return out.str();
}

RunConfig LoadRunConfig(const std::string& path) {
  RunConfig c;
  c.Merge(ReadTextFile(path));
  return c;
}

}  // namespace convmamba

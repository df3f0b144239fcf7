#include "convmamba/convmamba.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "convmamba/binary_io.hpp"
#include "convmamba/checkpoint.hpp"
#include "convmamba/commands.hpp"
#include "convmamba/error.hpp"
#include "convmamba/log.hpp"
#include "convmamba/ops.hpp"
#include "convmamba/run_config.hpp"

struct cm_config {
  convmamba::RunConfig value;
};

struct cm_model {
  convmamba::ModelConfig config;
  convmamba::ModelParams params;
};

namespace {

thread_local std::string g_last_error;

cm_status StatusFor(convmamba::ErrorKind kind) {
  using convmamba::ErrorKind;
  switch (kind) {
    case ErrorKind::kUsage: return CM_ERR_USAGE;
    case ErrorKind::kConfig: return CM_ERR_CONFIG;
    case ErrorKind::kIo: return CM_ERR_IO;
    case ErrorKind::kParse: return CM_ERR_PARSE;
    case ErrorKind::kFormat: return CM_ERR_FORMAT;
    case ErrorKind::kData:
    case ErrorKind::kDegenerateInput:
    case ErrorKind::kSplit:
    case ErrorKind::kSampler:
    case ErrorKind::kMetrics:
      return CM_ERR_DATA;
    case ErrorKind::kDimension: return CM_ERR_DIMENSION;
    case ErrorKind::kNumeric: return CM_ERR_NUMERIC;
    case ErrorKind::kParameter:
    case ErrorKind::kRange:
      return CM_ERR_INVALID_ARGUMENT;
    case ErrorKind::kContract: return CM_ERR_INTERNAL;
  }
  return CM_ERR_INTERNAL;
}

template <typename Fn>
cm_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const convmamba::Error& e) {
    g_last_error = e.what();
    return StatusFor(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CM_ERR_INTERNAL;
  }
}

cm_status NullArgument(const char* name) {
  g_last_error = std::string(name) + " must not be NULL";
  return CM_ERR_INVALID_ARGUMENT;
}

cm_status CopyOut(const std::string& s, char* buf, size_t size, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) return CM_OK;
  if (size < s.size() + 1) {
    g_last_error = "buffer too small: need " + std::to_string(s.size() + 1) + " bytes";
    return CM_ERR_INVALID_ARGUMENT;
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return CM_OK;
}

template <typename Fn>
cm_status RunCommand(const cm_config* config, Fn&& fn) {
  if (!config) return NullArgument("config");
  return Guard([&] {
    fn(config->value);
    return CM_OK;
  });
}

}  // namespace

extern "C" {

const char* cm_version(void) { return "1.0.0"; }

const char* cm_status_name(cm_status status) {
  switch (status) {
    case CM_OK: return "ok";
    case CM_ERR_USAGE: return "usage error";
    case CM_ERR_CONFIG: return "config error";
    case CM_ERR_IO: return "io error";
    case CM_ERR_PARSE: return "parse error";
    case CM_ERR_FORMAT: return "format error";
    case CM_ERR_DATA: return "data error";
    case CM_ERR_DIMENSION: return "dimension error";
    case CM_ERR_NUMERIC: return "numeric error";
    case CM_ERR_CHECK_FAILED: return "check failed";
    case CM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cm_last_error(void) { return g_last_error.c_str(); }

void cm_set_log_callback(cm_log_fn fn, void* user) {
  if (!fn) {
    convmamba::SetLogSink({});
    return;
  }
  convmamba::SetLogSink([fn, user](const std::string& line) { fn(line.c_str(), user); });
}

cm_status cm_config_create(cm_config** out) {
  if (!out) return NullArgument("out");
  return Guard([&] {
    *out = new cm_config{};
    return CM_OK;
  });
}

void cm_config_destroy(cm_config* config) { delete config; }

cm_status cm_config_load_file(cm_config* config, const char* path) {
  if (!config) return NullArgument("config");
  if (!path) return NullArgument("path");
  return Guard([&] {
    try {
      config->value.Merge(convmamba::ReadTextFile(path));
    } catch (const convmamba::Error& e) {
      if (e.kind() == convmamba::ErrorKind::kIo) {
        throw convmamba::Error(convmamba::ErrorKind::kUsage,
                               std::string("cannot read config file '") + path + "'");
      }
      throw;
    }
    return CM_OK;
  });
}

cm_status cm_config_set(cm_config* config, const char* key, const char* value) {
  if (!config) return NullArgument("config");
  if (!key) return NullArgument("key");
  if (!value) return NullArgument("value");
  return Guard([&] {
    config->value.Set(key, value);
    return CM_OK;
  });
}

cm_status cm_config_get(const cm_config* config, const char* key, char* buf, size_t size,
                        size_t* needed) {
  if (!config) return NullArgument("config");
  if (!key) return NullArgument("key");
  return Guard([&] { return CopyOut(config->value.Get(key), buf, size, needed); });
}

cm_status cm_config_to_toml(const cm_config* config, char* buf, size_t size, size_t* needed) {
  if (!config) return NullArgument("config");
  return Guard([&] { return CopyOut(config->value.ToToml(), buf, size, needed); });
}

cm_status cm_run_preprocess(const cm_config* config) {
  return RunCommand(config, convmamba::CmdPreprocess);
}
cm_status cm_run_split(const cm_config* config) { return RunCommand(config, convmamba::CmdSplit); }
cm_status cm_run_train(const cm_config* config) { return RunCommand(config, convmamba::CmdTrain); }
cm_status cm_run_eval(const cm_config* config) { return RunCommand(config, convmamba::CmdEval); }
cm_status cm_run_bench(const cm_config* config) { return RunCommand(config, convmamba::CmdBench); }
cm_status cm_run_synth(const cm_config* config) { return RunCommand(config, convmamba::CmdSynth); }

cm_status cm_run_gradcheck(const cm_config* config) {
  if (!config) return NullArgument("config");
  return Guard([&] {
    if (convmamba::CmdGradcheck(config->value)) return CM_OK;
    g_last_error = "finite-difference checks failed; see gradcheck.csv";
    return CM_ERR_CHECK_FAILED;
  });
}

cm_status cm_model_load(const cm_config* config, const char* checkpoint, cm_model** out) {
  if (!config) return NullArgument("config");
  if (!checkpoint) return NullArgument("checkpoint");
  if (!out) return NullArgument("out");
  return Guard([&] {
    auto model = std::make_unique<cm_model>();
    model->config = config->value.model;
    model->config.Validate();
    model->params = convmamba::LoadCheckpoint(checkpoint, model->config);
    *out = model.release();
    return CM_OK;
  });
}

void cm_model_destroy(cm_model* model) { delete model; }

size_t cm_model_param_count(const cm_model* model) {
  return model ? convmamba::CountParams(model->params) : 0;
}

cm_status cm_model_predict(const cm_model* model, const double* x, size_t n, double* probs) {
  if (!model) return NullArgument("model");
  if (!x) return NullArgument("x");
  if (!probs) return NullArgument("probs");
  return Guard([&] {
    const auto& c = model->config;
    const size_t count = n * c.in_channels * c.window_len;
    convmamba::Tensor input(convmamba::Shape{n, c.in_channels, c.window_len},
                            std::vector<double>(x, x + count));
    const convmamba::Tensor p =
        convmamba::SoftmaxRows(convmamba::PredictLogits(input, model->params, c));
    std::memcpy(probs, p.data().data(), p.numel() * sizeof(double));
    return CM_OK;
  });
}

}  // extern "C"

#include "convmamba/log.hpp"

#include <cstdio>
#include <mutex>

namespace convmamba {
namespace {

std::mutex& LogMutex() {
  static std::mutex m;
  return m;
}

LogSink& Sink() {
  static LogSink sink;
  return sink;
}

}  // namespace

void SetLogSink(LogSink sink) {
  std::lock_guard lock(LogMutex());
  Sink() = std::move(sink);
}

void Log(const std::string& line) {
  std::lock_guard lock(LogMutex());
  if (Sink()) {
    Sink()(line);
  } else {
    std::fprintf(stderr, "convmamba: %s\n", line.c_str());
  }
}

}  // namespace convmamba

#pragma once

#include <functional>
#include <string>

namespace convmamba {

// Line-oriented diagnostics. The default sink writes "convmamba: <line>" to
// standard error.
using LogSink = std::function<void(const std::string& line)>;

void SetLogSink(LogSink sink);  // empty restores the default
void Log(const std::string& line);

}  // namespace convmamba

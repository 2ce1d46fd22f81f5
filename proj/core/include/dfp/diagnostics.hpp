#pragma once

#include <functional>
#include <string_view>

namespace dfp {

enum class Severity { info, warning };

/// Receives progress and warning messages. The default sink writes to
/// standard error; pass an empty function to silence output.
using DiagnosticSink = std::function<void(Severity, std::string_view)>;

void set_diagnostic_sink(DiagnosticSink sink);
void info(std::string_view message);
void warn(std::string_view message);

}  // namespace dfp

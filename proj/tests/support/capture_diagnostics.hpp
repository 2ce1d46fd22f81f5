#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "dfp/diagnostics.hpp"

namespace fixture {

/// Collects library diagnostics for the lifetime of the object.
class CaptureDiagnostics {
public:
    CaptureDiagnostics() {
        dfp::set_diagnostic_sink([this](dfp::Severity s, std::string_view msg) {
            std::lock_guard lock(mutex_);
            (s == dfp::Severity::warning ? warnings : infos).emplace_back(msg);
        });
    }
    ~CaptureDiagnostics() { dfp::set_diagnostic_sink({}); }

    bool warned_about(std::string_view needle) const {
        for (const auto& w : warnings) {
            if (w.find(needle) != std::string::npos) return true;
        }
        return false;
    }

    std::vector<std::string> warnings;
    std::vector<std::string> infos;

private:
    std::mutex mutex_;
};

}  // namespace fixture

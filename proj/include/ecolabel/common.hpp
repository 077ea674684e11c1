#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace ecolabel {

// Microsecond resolution keeps ISO-8601 round-trips exact.
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

Timestamp now();
std::string format_timestamp(Timestamp t);
// Accepts "YYYY-MM-DDTHH:MM:SS[.ffffff]Z". Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);

// Random 128-bit identifier rendered as 32 lowercase hex digits.
std::string generate_id();

enum class Phase { Training, Inference };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view text);

enum class Provenance { Form, File, Probe, Provider };

std::string_view to_string(Provenance provenance);
std::optional<Provenance> parse_provenance(std::string_view text);

inline constexpr std::string_view kLocalProvider = "local";

}  // namespace ecolabel

#include "ecolabel/common.hpp"
#include "ecolabel/error.hpp"

#include <cstdio>
#include <ctime>
#include <openssl/rand.h>

namespace ecolabel {

Timestamp now() {
    return std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    auto secs = floor<seconds>(t);
    auto micros = (t - secs).count();
    std::time_t tt = secs.time_since_epoch().count();
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(micros));
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    std::string s(text);
    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6) {
        return std::nullopt;
    }
    long long micros = 0;
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        int digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (digits < 6) {
                micros = micros * 10 + (s[pos] - '0');
            }
            ++digits;
            ++pos;
        }
        if (digits == 0) {
            return std::nullopt;
        }
        for (; digits < 6; ++digits) {
            micros *= 10;
        }
    }
    if (pos + 1 != s.size() || s[pos] != 'Z') {
        return std::nullopt;
    }
    if (tm.tm_mon < 1 || tm.tm_mon > 12 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 ||
        tm.tm_min > 59 || tm.tm_sec > 60) {
        return std::nullopt;
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    std::time_t tt = timegm(&tm);
    return Timestamp{std::chrono::seconds{tt}} + std::chrono::microseconds{micros};
}

std::string generate_id() {
    // RAND_bytes reseeds after fork, a thread_local engine would not
    unsigned char bytes[16];
    if (RAND_bytes(bytes, sizeof bytes) != 1) {
        throw Error(ErrorCode::StorageFailure, "random source unavailable");
    }
    char buf[33];
    for (int i = 0; i < 16; ++i) std::snprintf(buf + 2 * i, 3, "%02x", bytes[i]);
    return buf;
}

std::string_view to_string(Phase phase) {
    return phase == Phase::Training ? "training" : "inference";
}

std::optional<Phase> parse_phase(std::string_view text) {
    if (text == "training") return Phase::Training;
    if (text == "inference") return Phase::Inference;
    return std::nullopt;
}

std::string_view to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::Form: return "form";
        case Provenance::File: return "file";
        case Provenance::Probe: return "probe";
        case Provenance::Provider: return "provider";
    }
    return "form";
}

std::optional<Provenance> parse_provenance(std::string_view text) {
    if (text == "form") return Provenance::Form;
    if (text == "file") return Provenance::File;
    if (text == "probe") return Provenance::Probe;
    if (text == "provider") return Provenance::Provider;
    return std::nullopt;
}

}  // namespace ecolabel

#pragma once

#include <arpa/inet.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>

namespace fnroot {

/// Epoch time in microseconds. Durations use the same unit.
using EpochMicros = std::int64_t;

inline constexpr EpochMicros kMicrosPerSecond = 1'000'000;

namespace proto {
inline constexpr std::uint8_t kIcmp = 1;
inline constexpr std::uint8_t kTcp = 6;
inline constexpr std::uint8_t kUdp = 17;
inline constexpr std::uint8_t kIcmpV6 = 58;
}  // namespace proto

inline bool has_ports(std::uint8_t protocol) {
    return protocol == proto::kTcp || protocol == proto::kUdp;
}

/// IPv4 or IPv6 address. IPv4 occupies the first four bytes.
class IpAddress {
public:
    enum class Family : std::uint8_t { v4 = 4, v6 = 6 };

    IpAddress() = default;

    static IpAddress v4(std::uint32_t host_order) {
        IpAddress a;
        a.family_ = Family::v4;
        a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
        a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
        a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
        a.bytes_[3] = static_cast<std::uint8_t>(host_order);
        return a;
    }

    static IpAddress from_bytes(Family family, const std::uint8_t* data) {
        IpAddress a;
        a.family_ = family;
        std::copy_n(data, family == Family::v4 ? 4 : 16, a.bytes_.begin());
        return a;
    }

    static std::optional<IpAddress> parse(std::string_view text) {
        std::string s(text);
        IpAddress a;
        if (inet_pton(AF_INET, s.c_str(), a.bytes_.data()) == 1) {
            a.family_ = Family::v4;
            return a;
        }
        if (inet_pton(AF_INET6, s.c_str(), a.bytes_.data()) == 1) {
            a.family_ = Family::v6;
            return a;
        }
        return std::nullopt;
    }

    Family family() const { return family_; }
    const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
    std::size_t width() const { return family_ == Family::v4 ? 4 : 16; }

    std::string to_string() const {
        char buf[INET6_ADDRSTRLEN] = {};
        inet_ntop(family_ == Family::v4 ? AF_INET : AF_INET6, bytes_.data(), buf, sizeof buf);
        return buf;
    }

    /// True when the leading `prefix_bits` of both addresses agree.
    bool in_prefix(const IpAddress& net, unsigned prefix_bits) const {
        if (family_ != net.family_) return false;
        prefix_bits = std::min<unsigned>(prefix_bits, static_cast<unsigned>(width() * 8));
        unsigned full = prefix_bits / 8;
        if (!std::equal(bytes_.begin(), bytes_.begin() + full, net.bytes_.begin())) return false;
        unsigned rest = prefix_bits % 8;
        if (rest == 0) return true;
        auto mask = static_cast<std::uint8_t>(0xFF << (8 - rest));
        return (bytes_[full] & mask) == (net.bytes_[full] & mask);
    }

    friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
    friend bool operator==(const IpAddress&, const IpAddress&) = default;

private:
    Family family_ = Family::v4;
    std::array<std::uint8_t, 16> bytes_{};
};

/// Flow key. Directional tuples keep source first; canonical() orders the
/// two endpoints so that both directions of a conversation share one key.
struct FiveTuple {
    IpAddress addr_a;
    IpAddress addr_b;
    std::uint16_t port_a = 0;
    std::uint16_t port_b = 0;
    std::uint8_t protocol = 0;

    FiveTuple reversed() const { return {addr_b, addr_a, port_b, port_a, protocol}; }

    FiveTuple canonical() const {
        if (std::tie(addr_b, port_b) < std::tie(addr_a, port_a)) return reversed();
        return *this;
    }

    std::string to_string() const;

    friend auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
    friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
};

enum class Directionality { directional, bidirectional };

inline FiveTuple key_for(const FiveTuple& t, Directionality d) {
    return d == Directionality::bidirectional ? t.canonical() : t;
}

struct FiveTupleHash {
    std::size_t operator()(const FiveTuple& t) const noexcept {
        // FNV-1a over the significant bytes.
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](std::uint8_t b) {
            h ^= b;
            h *= 1099511628211ULL;
        };
        for (const auto* a : {&t.addr_a, &t.addr_b}) {
            mix(static_cast<std::uint8_t>(a->family()));
            for (std::size_t i = 0; i < a->width(); ++i) mix(a->bytes()[i]);
        }
        mix(static_cast<std::uint8_t>(t.port_a >> 8));
        mix(static_cast<std::uint8_t>(t.port_a));
        mix(static_cast<std::uint8_t>(t.port_b >> 8));
        mix(static_cast<std::uint8_t>(t.port_b));
        mix(t.protocol);
        return static_cast<std::size_t>(h);
    }
};

inline std::string protocol_name(std::uint8_t p) {
    switch (p) {
        case proto::kTcp: return "TCP";
        case proto::kUdp: return "UDP";
        case proto::kIcmp: return "ICMP";
        case proto::kIcmpV6: return "IPV6-ICMP";
        default: return "PROTO:" + std::to_string(p);
    }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    s = trim(s);
    Int v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Accepts names (tcp, udp, icmp, ipv6-icmp, PROTO:N) or a decimal number.
inline std::optional<std::uint8_t> parse_protocol(std::string_view text) {
    auto s = detail::to_lower(detail::trim(text));
    if (s == "tcp") return proto::kTcp;
    if (s == "udp") return proto::kUdp;
    if (s == "icmp") return proto::kIcmp;
    if (s == "ipv6-icmp" || s == "icmpv6") return proto::kIcmpV6;
    if (s.rfind("proto:", 0) == 0) s = s.substr(6);
    if (auto n = detail::parse_int<unsigned>(s); n && *n <= 255) return static_cast<std::uint8_t>(*n);
    return std::nullopt;
}

inline std::string FiveTuple::to_string() const {
    auto endpoint = [](const IpAddress& a, std::uint16_t port) {
        std::string host = a.family() == IpAddress::Family::v6 ? "[" + a.to_string() + "]" : a.to_string();
        return host + ":" + std::to_string(port);
    };
    return protocol_name(protocol) + " " + endpoint(addr_a, port_a) + " -> " + endpoint(addr_b, port_b);
}

// ---------------------------------------------------------------------------
// Time handling. All textual times are interpreted as UTC.

inline EpochMicros civil_to_micros(int year, unsigned month, unsigned day, int hour, int minute,
                                   int second, std::int64_t micros) {
    using namespace std::chrono;
    auto days = sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
    std::int64_t secs = static_cast<std::int64_t>(days.time_since_epoch().count()) * 86400 +
                        hour * 3600 + minute * 60 + second;
    return secs * kMicrosPerSecond + micros;
}

namespace detail {

/// Parses ".ffffff" fraction digits (any count) into microseconds, truncating.
inline std::optional<std::int64_t> parse_fraction(std::string_view digits) {
    if (digits.empty()) return std::nullopt;
    std::int64_t v = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (digits[i] < '0' || digits[i] > '9') return std::nullopt;
        if (i < 6) v = v * 10 + (digits[i] - '0');
    }
    for (std::size_t i = digits.size(); i < 6; ++i) v *= 10;
    return v;
}

inline bool valid_civil(int y, unsigned mo, unsigned d, int h, int mi, int s) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    return ymd.ok() && h >= 0 && h < 24 && mi >= 0 && mi < 60 && s >= 0 && s < 61;
}

}  // namespace detail

/// Parses "YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|±HH[:]MM]" into UTC microseconds.
inline std::optional<EpochMicros> parse_iso_time(std::string_view text) {
    auto s = detail::trim(text);
    if (s.size() < 19) return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len) { return detail::parse_int<int>(s.substr(pos, len)); };
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
        return std::nullopt;
    auto y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), sec = num(17, 2);
    if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
    if (*mo < 1 || *d < 1 || !detail::valid_civil(*y, *mo, *d, *h, *mi, *sec)) return std::nullopt;
    std::size_t pos = 19;
    std::int64_t frac = 0;
    if (pos < s.size() && s[pos] == '.') {
        std::size_t end = pos + 1;
        while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
        auto f = detail::parse_fraction(s.substr(pos + 1, end - pos - 1));
        if (!f) return std::nullopt;
        frac = *f;
        pos = end;
    }
    std::int64_t offset_seconds = 0;
    if (pos < s.size()) {
        auto zone = s.substr(pos);
        if (zone == "Z") {
        } else if (zone[0] == '+' || zone[0] == '-') {
            std::string digits;
            for (char c : zone.substr(1))
                if (c != ':') digits.push_back(c);
            if (digits.size() != 4) return std::nullopt;
            auto hh = detail::parse_int<int>(std::string_view(digits).substr(0, 2));
            auto mm = detail::parse_int<int>(std::string_view(digits).substr(2, 2));
            if (!hh || !mm) return std::nullopt;
            offset_seconds = (*hh * 3600 + *mm * 60) * (zone[0] == '+' ? 1 : -1);
        } else {
            return std::nullopt;
        }
    }
    return civil_to_micros(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d), *h, *mi, *sec, frac) -
           offset_seconds * kMicrosPerSecond;
}

/// Parses decimal epoch seconds, e.g. "1276560000.25".
inline std::optional<EpochMicros> parse_epoch_seconds(std::string_view text) {
    auto s = detail::trim(text);
    bool negative = !s.empty() && s.front() == '-';
    if (negative) return std::nullopt;
    auto dot = s.find('.');
    auto whole = detail::parse_int<std::int64_t>(s.substr(0, dot));
    if (!whole) return std::nullopt;
    std::int64_t frac = 0;
    if (dot != std::string_view::npos) {
        auto f = detail::parse_fraction(s.substr(dot + 1));
        if (!f) return std::nullopt;
        frac = *f;
    }
    return *whole * kMicrosPerSecond + frac;
}

/// ISO-8601 or decimal epoch seconds.
inline std::optional<EpochMicros> parse_time(std::string_view text) {
    if (auto t = parse_iso_time(text)) return t;
    return parse_epoch_seconds(text);
}

/// Renders UTC "YYYY-MM-DDTHH:MM:SS.ffffffZ".
inline std::string format_time(EpochMicros t) {
    using namespace std::chrono;
    auto secs = t >= 0 ? t / kMicrosPerSecond : (t - kMicrosPerSecond + 1) / kMicrosPerSecond;
    auto frac = t - secs * kMicrosPerSecond;
    auto days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
    auto rem = secs - days * 86400;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[128];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%06lldZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), static_cast<long long>(rem / 3600),
                  static_cast<long long>(rem / 60 % 60), static_cast<long long>(rem % 60),
                  static_cast<long long>(frac));
    return buf;
}

}  // namespace fnroot

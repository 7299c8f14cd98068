#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fnroot/net.hpp"

namespace fnroot {

namespace linktype {
inline constexpr std::uint32_t kEthernet = 1;
inline constexpr std::uint32_t kRaw = 101;
inline constexpr std::uint32_t kIpv4 = 228;
inline constexpr std::uint32_t kIpv6 = 229;
}  // namespace linktype

enum class TimestampPrecision { microsecond, nanosecond };
enum class ByteOrder { big, little };

struct CaptureMetadata {
    TimestampPrecision precision = TimestampPrecision::microsecond;
    ByteOrder byte_order = ByteOrder::little;
    std::uint32_t link_type = linktype::kEthernet;
    std::uint32_t snap_length = 65535;
    std::uint64_t packet_count = 0;

    friend bool operator==(const CaptureMetadata&, const CaptureMetadata&) = default;
};

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcp_flag

/// One captured packet. `tuple` is present exactly when the frame decoded to
/// a keyed packet; otherwise `unkeyed_reason` says why.
struct PacketRecord {
    std::uint64_t packet_id = 0;
    EpochMicros timestamp = 0;
    std::optional<FiveTuple> tuple;
    std::uint32_t ip_length = 0;
    std::uint32_t payload_length = 0;
    std::optional<std::uint8_t> tcp_flags;
    std::optional<std::string> unkeyed_reason;

    /// Raw link-layer bytes; only retained when parsing with keep_frames.
    std::vector<std::uint8_t> frame;
    std::uint32_t original_length = 0;

    bool keyed() const { return !unkeyed_reason.has_value(); }

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct ParsedCapture {
    CaptureMetadata metadata;
    std::vector<PacketRecord> packets;
};

/// Malformed capture file. For truncated records `partial()` holds
/// everything decoded before `offset()`.
class CaptureFormatError : public std::runtime_error {
public:
    CaptureFormatError(const std::string& what, std::uint64_t offset, ParsedCapture partial = {})
        : std::runtime_error(what), offset_(offset), partial_(std::move(partial)) {}

    std::uint64_t offset() const { return offset_; }
    std::uint64_t packets_parsed() const { return partial_.packets.size(); }
    const ParsedCapture& partial() const { return partial_; }

private:
    std::uint64_t offset_;
    ParsedCapture partial_;
};

namespace detail {

inline constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
inline constexpr std::size_t kGlobalHeaderSize = 24;
inline constexpr std::size_t kRecordHeaderSize = 16;

inline std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] << 8 | b[off + 1]);
}

inline std::uint32_t load32(const std::uint8_t* p, ByteOrder order) {
    if (order == ByteOrder::big)
        return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
    return std::uint32_t(p[3]) << 24 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[1]) << 8 | p[0];
}

inline void store32(std::vector<std::uint8_t>& out, std::uint32_t v, ByteOrder order) {
    if (order == ByteOrder::big) {
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
    } else {
        for (int s = 0; s <= 24; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
    }
}

inline void store16(std::vector<std::uint8_t>& out, std::uint16_t v, ByteOrder order) {
    if (order == ByteOrder::big) {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    } else {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
}

inline PacketRecord unkeyed(PacketRecord rec, std::string reason) {
    rec.tuple.reset();
    rec.tcp_flags.reset();
    rec.payload_length = 0;
    rec.unkeyed_reason = std::move(reason);
    return rec;
}

/// Decodes the transport header given the bytes following the IP header(s).
/// `l4_length` is the transport length implied by the IP header, which may
/// exceed the captured bytes.
inline PacketRecord decode_transport(PacketRecord rec, std::span<const std::uint8_t> l4, std::uint32_t l4_length,
                                     FiveTuple tuple) {
    switch (tuple.protocol) {
        case proto::kTcp: {
            if (l4.size() < 20 || l4_length < 20) return unkeyed(std::move(rec), "truncated tcp header");
            std::uint32_t data_offset = (l4[12] >> 4) * 4u;
            if (data_offset < 20 || data_offset > l4_length) return unkeyed(std::move(rec), "bad tcp data offset");
            tuple.port_a = be16(l4, 0);
            tuple.port_b = be16(l4, 2);
            rec.tcp_flags = l4[13];
            rec.payload_length = l4_length - data_offset;
            break;
        }
        case proto::kUdp: {
            if (l4.size() < 8 || l4_length < 8) return unkeyed(std::move(rec), "truncated udp header");
            tuple.port_a = be16(l4, 0);
            tuple.port_b = be16(l4, 2);
            rec.payload_length = l4_length - 8;
            break;
        }
        case proto::kIcmp:
        case proto::kIcmpV6:
            rec.payload_length = l4_length >= 8 ? l4_length - 8 : 0;
            break;
        default:
            rec.payload_length = l4_length;
            break;
    }
    rec.tuple = tuple;
    return rec;
}

inline PacketRecord decode_ipv4(PacketRecord rec, std::span<const std::uint8_t> ip) {
    if (ip.size() < 20) return unkeyed(std::move(rec), "truncated ip header");
    if ((ip[0] >> 4) != 4) return unkeyed(std::move(rec), "bad ip version");
    std::uint32_t header_length = (ip[0] & 0x0F) * 4u;
    if (header_length < 20) return unkeyed(std::move(rec), "bad ip header length");
    if (ip.size() < header_length) return unkeyed(std::move(rec), "truncated ip header");
    std::uint32_t total_length = be16(ip, 2);
    if (total_length < header_length) return unkeyed(std::move(rec), "bad ip total length");
    rec.ip_length = total_length;
    if ((be16(ip, 6) & 0x1FFF) != 0) return unkeyed(std::move(rec), "ip-fragment");

    FiveTuple tuple;
    tuple.addr_a = IpAddress::from_bytes(IpAddress::Family::v4, ip.data() + 12);
    tuple.addr_b = IpAddress::from_bytes(IpAddress::Family::v4, ip.data() + 16);
    tuple.protocol = ip[9];
    return decode_transport(std::move(rec), ip.subspan(header_length), total_length - header_length, tuple);
}

inline PacketRecord decode_ipv6(PacketRecord rec, std::span<const std::uint8_t> ip) {
    if (ip.size() < 40) return unkeyed(std::move(rec), "truncated ip header");
    if ((ip[0] >> 4) != 6) return unkeyed(std::move(rec), "bad ip version");
    std::uint32_t total_length = 40u + be16(ip, 4);
    rec.ip_length = total_length;

    std::uint8_t next = ip[6];
    std::size_t off = 40;
    for (;;) {
        bool extension = next == 0 || next == 43 || next == 60 || next == 51 || next == 44;
        if (!extension) break;
        if (ip.size() < off + 8) return unkeyed(std::move(rec), "truncated extension header");
        std::size_t length;
        if (next == 44) {
            if ((be16(ip, off + 2) >> 3) != 0) return unkeyed(std::move(rec), "ip-fragment");
            length = 8;
        } else if (next == 51) {
            length = (ip[off + 1] + 2u) * 4u;
        } else {
            length = (ip[off + 1] + 1u) * 8u;
        }
        next = ip[off];
        off += length;
        if (off > total_length) return unkeyed(std::move(rec), "bad extension header length");
    }

    FiveTuple tuple;
    tuple.addr_a = IpAddress::from_bytes(IpAddress::Family::v6, ip.data() + 8);
    tuple.addr_b = IpAddress::from_bytes(IpAddress::Family::v6, ip.data() + 24);
    tuple.protocol = next;
    auto l4 = off <= ip.size() ? ip.subspan(off) : std::span<const std::uint8_t>{};
    return decode_transport(std::move(rec), l4, total_length - static_cast<std::uint32_t>(off), tuple);
}

inline PacketRecord decode_ip(PacketRecord rec, std::span<const std::uint8_t> ip) {
    if (ip.empty()) return unkeyed(std::move(rec), "truncated ip header");
    switch (ip[0] >> 4) {
        case 4: return decode_ipv4(std::move(rec), ip);
        case 6: return decode_ipv6(std::move(rec), ip);
        default: return unkeyed(std::move(rec), "bad ip version");
    }
}

}  // namespace detail

/// Decodes one link-layer frame. Never throws on malformed input; failures
/// are reported through `unkeyed_reason`.
inline PacketRecord decode_packet(std::span<const std::uint8_t> frame, std::uint32_t link_type,
                                  EpochMicros timestamp) {
    PacketRecord rec;
    rec.timestamp = timestamp;
    switch (link_type) {
        case linktype::kEthernet: {
            if (frame.size() < 14) return detail::unkeyed(std::move(rec), "truncated ethernet header");
            std::uint16_t ethertype = detail::be16(frame, 12);
            std::size_t off = 14;
            if (ethertype == 0x8100 || ethertype == 0x88a8) {
                if (frame.size() < 18) return detail::unkeyed(std::move(rec), "truncated vlan tag");
                ethertype = detail::be16(frame, 16);
                off = 18;
                if (ethertype == 0x8100 || ethertype == 0x88a8)
                    return detail::unkeyed(std::move(rec), "nested vlan");
            }
            if (ethertype == 0x0800) return detail::decode_ipv4(std::move(rec), frame.subspan(off));
            if (ethertype == 0x86DD) return detail::decode_ipv6(std::move(rec), frame.subspan(off));
            return detail::unkeyed(std::move(rec), "non-IP ethertype");
        }
        case linktype::kRaw:
            return detail::decode_ip(std::move(rec), frame);
        case linktype::kIpv4:
            return detail::decode_ipv4(std::move(rec), frame);
        case linktype::kIpv6:
            return detail::decode_ipv6(std::move(rec), frame);
        default:
            return detail::unkeyed(std::move(rec), "unsupported link-type " + std::to_string(link_type));
    }
}

struct CaptureParseOptions {
    bool keep_frames = false;
    /// Id of the first packet; later captures continue from where earlier ones stopped.
    std::uint64_t first_packet_id = 1;
};

/// Streaming reader for the classic capture format.
class CaptureReader {
public:
    /// Records may exceed a small snap length up to this size before the
    /// file is treated as corrupt.
    static constexpr std::uint32_t kMaxRecordLength = 262144;

    explicit CaptureReader(std::istream& in, CaptureParseOptions options = {}) : in_(in), options_(options) {
        std::uint8_t header[detail::kGlobalHeaderSize];
        auto got = read_up_to(header, sizeof header);
        if (got == 0) throw CaptureFormatError("missing global header", 0);
        if (got < 4) throw CaptureFormatError("unrecognized capture magic", 0);

        std::uint32_t magic_le = detail::load32(header, ByteOrder::little);
        std::uint32_t magic_be = detail::load32(header, ByteOrder::big);
        if (magic_le == detail::kMagicMicro || magic_le == detail::kMagicNano) {
            meta_.byte_order = ByteOrder::little;
            meta_.precision = magic_le == detail::kMagicNano ? TimestampPrecision::nanosecond
                                                              : TimestampPrecision::microsecond;
        } else if (magic_be == detail::kMagicMicro || magic_be == detail::kMagicNano) {
            meta_.byte_order = ByteOrder::big;
            meta_.precision = magic_be == detail::kMagicNano ? TimestampPrecision::nanosecond
                                                              : TimestampPrecision::microsecond;
        } else {
            throw CaptureFormatError("unrecognized capture magic", 0);
        }
        if (got < sizeof header) throw CaptureFormatError("truncated global header", 0);
        meta_.snap_length = detail::load32(header + 16, meta_.byte_order);
        meta_.link_type = detail::load32(header + 20, meta_.byte_order);
        if (meta_.snap_length == 0) throw CaptureFormatError("snap length is zero", 16);
        offset_ = sizeof header;
    }

    const CaptureMetadata& metadata() const { return meta_; }
    std::uint64_t offset() const { return offset_; }

    /// Returns the next packet, or nullopt at a clean end of file. Throws
    /// CaptureFormatError (without partial data) on truncation.
    std::optional<PacketRecord> next() {
        std::uint8_t header[detail::kRecordHeaderSize];
        auto got = read_up_to(header, sizeof header);
        if (got == 0) return std::nullopt;
        if (got < sizeof header) {
            throw CaptureFormatError("truncated record header at offset " + std::to_string(offset_) + " after " +
                                         std::to_string(meta_.packet_count) + " packets",
                                     offset_);
        }
        auto order = meta_.byte_order;
        std::uint32_t ts_sec = detail::load32(header, order);
        std::uint32_t ts_frac = detail::load32(header + 4, order);
        std::uint32_t captured = detail::load32(header + 8, order);
        std::uint32_t original = detail::load32(header + 12, order);

        if (captured > std::max<std::uint32_t>(meta_.snap_length, kMaxRecordLength)) {
            throw CaptureFormatError("record at offset " + std::to_string(offset_) + " declares " +
                                         std::to_string(captured) + " bytes, beyond the snap length, after " +
                                         std::to_string(meta_.packet_count) + " packets",
                                     offset_);
        }
        std::vector<std::uint8_t> frame(captured);
        if (read_up_to(frame.data(), captured) < captured) {
            throw CaptureFormatError("truncated record body at offset " + std::to_string(offset_) + ": declared " +
                                         std::to_string(captured) + " bytes, after " +
                                         std::to_string(meta_.packet_count) + " packets",
                                     offset_);
        }

        std::int64_t frac_us = meta_.precision == TimestampPrecision::nanosecond ? ts_frac / 1000 : ts_frac;
        auto ts = static_cast<EpochMicros>(ts_sec) * kMicrosPerSecond + frac_us;
        auto rec = decode_packet(frame, meta_.link_type, ts);
        rec.packet_id = options_.first_packet_id + meta_.packet_count;
        rec.original_length = original;
        if (options_.keep_frames) rec.frame = std::move(frame);

        offset_ += sizeof header + captured;
        ++meta_.packet_count;
        return rec;
    }

private:
    std::size_t read_up_to(std::uint8_t* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        return static_cast<std::size_t>(in_.gcount());
    }

    std::istream& in_;
    CaptureParseOptions options_;
    CaptureMetadata meta_;
    std::uint64_t offset_ = 0;
};

inline ParsedCapture parse_capture(std::istream& in, CaptureParseOptions options = {}) {
    CaptureReader reader(in, options);
    ParsedCapture out;
    try {
        while (auto rec = reader.next()) out.packets.push_back(std::move(*rec));
    } catch (const CaptureFormatError& e) {
        out.metadata = reader.metadata();
        throw CaptureFormatError(e.what(), e.offset(), std::move(out));
    }
    out.metadata = reader.metadata();
    return out;
}

inline ParsedCapture parse_capture(std::span<const std::uint8_t> bytes, CaptureParseOptions options = {}) {
    std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return parse_capture(in, options);
}

/// Serializes packets using their retained frames. Nanosecond files store
/// the microsecond timestamp scaled by 1000.
inline std::vector<std::uint8_t> write_capture(const CaptureMetadata& meta, std::span<const PacketRecord> packets) {
    if (meta.snap_length == 0) throw std::invalid_argument("snap length must be positive");
    for (const auto& p : packets) {
        if (p.frame.size() > meta.snap_length)
            throw std::invalid_argument("packet " + std::to_string(p.packet_id) + " exceeds snap length");
        if (p.timestamp < 0 || p.timestamp / kMicrosPerSecond > 0xFFFFFFFFLL)
            throw std::invalid_argument("packet " + std::to_string(p.packet_id) + " timestamp out of range");
    }

    std::vector<std::uint8_t> out;
    auto order = meta.byte_order;
    detail::store32(out, meta.precision == TimestampPrecision::nanosecond ? detail::kMagicNano : detail::kMagicMicro,
                    order);
    detail::store16(out, 2, order);
    detail::store16(out, 4, order);
    detail::store32(out, 0, order);  // thiszone
    detail::store32(out, 0, order);  // sigfigs
    detail::store32(out, meta.snap_length, order);
    detail::store32(out, meta.link_type, order);

    for (const auto& p : packets) {
        auto frac = static_cast<std::uint32_t>(p.timestamp % kMicrosPerSecond);
        if (meta.precision == TimestampPrecision::nanosecond) frac *= 1000;
        auto captured = static_cast<std::uint32_t>(p.frame.size());
        detail::store32(out, static_cast<std::uint32_t>(p.timestamp / kMicrosPerSecond), order);
        detail::store32(out, frac, order);
        detail::store32(out, captured, order);
        detail::store32(out, std::max(p.original_length, captured), order);
        out.insert(out.end(), p.frame.begin(), p.frame.end());
    }
    return out;
}

}  // namespace fnroot

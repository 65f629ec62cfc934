#include "bleloc/codec.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bleloc/error.hpp"

namespace bleloc::codec {

namespace {

constexpr std::array<std::string_view, 4> kUrlSchemes = {"http://www.", "https://www.", "http://",
                                                         "https://"};
constexpr std::array<std::string_view, 14> kUrlExpansions = {
    ".com/", ".org/", ".edu/", ".net/", ".info/", ".biz/", ".gov/",
    ".com",  ".org",  ".edu",  ".net",  ".info",  ".biz",  ".gov"};

constexpr bool is_url_literal(std::uint8_t b) { return b >= 0x21 && b <= 0x7E; }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint16_t u16() {
    const auto hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    std::array<std::uint8_t, N> out{};
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), N, out.begin());
    pos_ += N;
    return out;
  }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void i8(std::int8_t v) { out_.push_back(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>((v >> shift) & 0xFF));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

void expect_length(std::span<const std::uint8_t> p, std::size_t want, std::string_view what) {
  if (p.size() < want) {
    throw Error(ErrorCode::FrameTooShort, fmt::format("{} needs {} bytes, got {}", what, want, p.size()));
  }
  if (p.size() > want) {
    throw Error(ErrorCode::FrameTooLong, fmt::format("{} needs {} bytes, got {}", what, want, p.size()));
  }
}

template <std::size_t N>
bool starts_with_at(std::span<const std::uint8_t> p, std::size_t offset,
                    const std::array<std::uint8_t, N>& prefix) {
  return p.size() >= offset + N && std::equal(prefix.begin(), prefix.end(), p.begin() + static_cast<std::ptrdiff_t>(offset));
}

IBeaconFrame decode_ibeacon(std::span<const std::uint8_t> p) {
  expect_length(p, kIBeaconLength, "iBeacon");
  Reader r(p.subspan(kIBeaconPrefix.size()));
  IBeaconFrame f;
  f.uuid = r.fixed<16>();
  f.major = r.u16();
  f.minor = r.u16();
  f.measured_power_dbm = r.i8();
  return f;
}

AltBeaconFrame decode_altbeacon(std::span<const std::uint8_t> p) {
  expect_length(p, kAltBeaconLength, "AltBeacon");
  Reader r(p);
  AltBeaconFrame f;
  const auto lo = r.u8();
  const auto hi = r.u8();
  f.manufacturer_id = static_cast<std::uint16_t>((hi << 8) | lo);
  r.u16();  // beacon code
  f.beacon_id = r.fixed<20>();
  f.reference_rssi_dbm = r.i8();
  f.mfg_reserved = r.u8();
  return f;
}

AdvertisementFrame decode_eddystone(std::span<const std::uint8_t> p) {
  if (p.size() < 3) throw Error(ErrorCode::FrameTooShort, "Eddystone frame without frame type");
  const auto type = p[2];
  switch (type) {
    case static_cast<std::uint8_t>(EddystoneType::Uid): {
      expect_length(p, kEddystoneUidLength, "Eddystone-UID");
      Reader r(p.subspan(3));
      EddystoneUid f;
      f.tx_power_dbm = r.i8();
      f.namespace_id = r.fixed<10>();
      f.instance_id = r.fixed<6>();
      if (r.u16() != 0) throw Error(ErrorCode::MalformedFrame, "Eddystone-UID reserved bytes set");
      return f;
    }
    case static_cast<std::uint8_t>(EddystoneType::Url): {
      if (p.size() < kEddystoneUrlMinLength) {
        throw Error(ErrorCode::FrameTooShort, fmt::format("Eddystone-URL needs at least {} bytes, got {}",
                                                          kEddystoneUrlMinLength, p.size()));
      }
      if (p.size() > kEddystoneUrlMaxLength) {
        throw Error(ErrorCode::FrameTooLong, fmt::format("Eddystone-URL allows at most {} bytes, got {}",
                                                         kEddystoneUrlMaxLength, p.size()));
      }
      EddystoneUrl f;
      f.tx_power_dbm = static_cast<std::int8_t>(p[3]);
      const auto encoded = p.subspan(4);
      f.url = decode_url(encoded);
      Bytes canonical;
      try {
        canonical = encode_url(f.url);
      } catch (const Error&) {
        throw Error(ErrorCode::MalformedFrame, "non-canonical Eddystone-URL encoding");
      }
      if (!std::equal(canonical.begin(), canonical.end(), encoded.begin(), encoded.end())) {
        throw Error(ErrorCode::MalformedFrame, "non-canonical Eddystone-URL encoding");
      }
      return f;
    }
    case static_cast<std::uint8_t>(EddystoneType::Tlm): {
      expect_length(p, kEddystoneTlmLength, "Eddystone-TLM");
      Reader r(p.subspan(3));
      if (r.u8() != 0x00) throw Error(ErrorCode::MalformedFrame, "unsupported Eddystone-TLM version");
      EddystoneTlm f;
      f.battery_mv = r.u16();
      f.temperature_fixed = static_cast<std::int16_t>(r.u16());
      f.adv_count = r.u32();
      f.uptime_deciseconds = r.u32();
      return f;
    }
    case static_cast<std::uint8_t>(EddystoneType::Eid): {
      expect_length(p, kEddystoneEidLength, "Eddystone-EID");
      Reader r(p.subspan(3));
      EddystoneEid f;
      f.tx_power_dbm = r.i8();
      f.ephemeral_id = r.fixed<8>();
      return f;
    }
    default:
      throw Error(ErrorCode::UnknownProtocol, fmt::format("unknown Eddystone frame type 0x{:02X}", type));
  }
}

}  // namespace

std::int16_t EddystoneTlm::temperature_to_fixed(double celsius) {
  if (!(celsius >= -128.0 && celsius < 128.0)) {
    throw Error(ErrorCode::InvalidFrame, fmt::format("TLM temperature {} outside [-128, 128)", celsius));
  }
  const auto scaled = std::lround(celsius * 256.0);
  return static_cast<std::int16_t>(std::clamp<long>(scaled, -32768, 32767));
}

AdvertisementFrame decode(std::span<const std::uint8_t> payload) {
  if (payload.size() < 4) {
    throw Error(ErrorCode::FrameTooShort, fmt::format("payload of {} bytes", payload.size()));
  }
  if (starts_with_at(payload, 0, kIBeaconPrefix)) return decode_ibeacon(payload);
  if (starts_with_at(payload, 2, kAltBeaconCode)) return decode_altbeacon(payload);
  if (starts_with_at(payload, 0, kEddystoneServiceUuid)) return decode_eddystone(payload);
  throw Error(ErrorCode::UnknownProtocol,
              fmt::format("unrecognised preamble {:02X} {:02X} {:02X} {:02X}", payload[0], payload[1],
                          payload[2], payload[3]));
}

Bytes encode(const AdvertisementFrame& frame) {
  Writer w;
  std::visit(
      [&w](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, IBeaconFrame>) {
          w.bytes(kIBeaconPrefix);
          w.bytes(f.uuid);
          w.u16(f.major);
          w.u16(f.minor);
          w.i8(f.measured_power_dbm);
        } else if constexpr (std::is_same_v<T, EddystoneUid>) {
          w.bytes(kEddystoneServiceUuid);
          w.u8(static_cast<std::uint8_t>(EddystoneType::Uid));
          w.i8(f.tx_power_dbm);
          w.bytes(f.namespace_id);
          w.bytes(f.instance_id);
          w.u16(0);
        } else if constexpr (std::is_same_v<T, EddystoneUrl>) {
          w.bytes(kEddystoneServiceUuid);
          w.u8(static_cast<std::uint8_t>(EddystoneType::Url));
          w.i8(f.tx_power_dbm);
          w.bytes(encode_url(f.url));
        } else if constexpr (std::is_same_v<T, EddystoneTlm>) {
          w.bytes(kEddystoneServiceUuid);
          w.u8(static_cast<std::uint8_t>(EddystoneType::Tlm));
          w.u8(0x00);
          w.u16(f.battery_mv);
          w.u16(static_cast<std::uint16_t>(f.temperature_fixed));
          w.u32(f.adv_count);
          w.u32(f.uptime_deciseconds);
        } else if constexpr (std::is_same_v<T, EddystoneEid>) {
          w.bytes(kEddystoneServiceUuid);
          w.u8(static_cast<std::uint8_t>(EddystoneType::Eid));
          w.i8(f.tx_power_dbm);
          w.bytes(f.ephemeral_id);
        } else {
          w.u8(static_cast<std::uint8_t>(f.manufacturer_id & 0xFF));
          w.u8(static_cast<std::uint8_t>(f.manufacturer_id >> 8));
          w.bytes(kAltBeaconCode);
          w.bytes(f.beacon_id);
          w.i8(f.reference_rssi_dbm);
          w.u8(f.mfg_reserved);
        }
      },
      frame);
  return w.take();
}

std::optional<int> measured_power(const AdvertisementFrame& frame) {
  return std::visit(
      [](const auto& f) -> std::optional<int> {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, IBeaconFrame>) return f.measured_power_dbm;
        else if constexpr (std::is_same_v<T, AltBeaconFrame>) return f.reference_rssi_dbm;
        else if constexpr (std::is_same_v<T, EddystoneTlm>) return std::nullopt;
        else return f.tx_power_dbm;
      },
      frame);
}

std::optional<double> reference_distance_m(const AdvertisementFrame& frame) {
  if (std::holds_alternative<EddystoneTlm>(frame)) return std::nullopt;
  if (std::holds_alternative<IBeaconFrame>(frame) || std::holds_alternative<AltBeaconFrame>(frame)) {
    return 1.0;
  }
  return 0.0;
}

std::string_view variant_name(const AdvertisementFrame& frame) {
  constexpr std::array<std::string_view, 6> names = {"ibeacon",       "eddystone_uid", "eddystone_url",
                                                     "eddystone_tlm", "eddystone_eid", "altbeacon"};
  return names[frame.index()];
}

Bytes encode_url(std::string_view url) {
  Bytes out;
  std::size_t pos = std::string_view::npos;
  // Longest scheme first: "https://www." beats "https://".
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < kUrlSchemes.size(); ++i) {
    if (url.starts_with(kUrlSchemes[i]) && kUrlSchemes[i].size() > best_len) {
      best_len = kUrlSchemes[i].size();
      pos = i;
    }
  }
  if (pos == std::string_view::npos) {
    throw Error(ErrorCode::InvalidFrame, fmt::format("url '{}' has no encodable scheme", url));
  }
  out.push_back(static_cast<std::uint8_t>(pos));

  std::size_t i = best_len;
  while (i < url.size()) {
    std::size_t match = kUrlExpansions.size();
    std::size_t match_len = 0;
    for (std::size_t e = 0; e < kUrlExpansions.size(); ++e) {
      if (url.substr(i).starts_with(kUrlExpansions[e]) && kUrlExpansions[e].size() > match_len) {
        match = e;
        match_len = kUrlExpansions[e].size();
      }
    }
    if (match_len > 0) {
      out.push_back(static_cast<std::uint8_t>(match));
      i += match_len;
      continue;
    }
    const auto c = static_cast<std::uint8_t>(url[i]);
    if (!is_url_literal(c)) {
      throw Error(ErrorCode::InvalidFrame, fmt::format("url byte 0x{:02X} cannot be encoded", c));
    }
    out.push_back(c);
    ++i;
  }
  if (out.size() - 1 > kEddystoneUrlMaxEncoded) {
    throw Error(ErrorCode::InvalidFrame,
                fmt::format("encoded url is {} bytes, limit {}", out.size() - 1, kEddystoneUrlMaxEncoded));
  }
  return out;
}

std::string decode_url(std::span<const std::uint8_t> scheme_and_body) {
  if (scheme_and_body.empty()) throw Error(ErrorCode::FrameTooShort, "missing URL scheme byte");
  const auto scheme = scheme_and_body[0];
  if (scheme >= kUrlSchemes.size()) {
    throw Error(ErrorCode::MalformedFrame, fmt::format("reserved URL scheme 0x{:02X}", scheme));
  }
  std::string url(kUrlSchemes[scheme]);
  for (const auto b : scheme_and_body.subspan(1)) {
    if (b < kUrlExpansions.size()) {
      url += kUrlExpansions[b];
    } else if (is_url_literal(b)) {
      url += static_cast<char>(b);
    } else {
      throw Error(ErrorCode::MalformedFrame, fmt::format("reserved URL byte 0x{:02X}", b));
    }
  }
  return url;
}

Bytes parse_hex(std::string_view hex) {
  std::string digits;
  for (const char c : hex) {
    if (c == ' ' || c == ':' || c == '\t') continue;
    digits += c;
  }
  if (digits.starts_with("0x") || digits.starts_with("0X")) digits.erase(0, 2);
  if (digits.size() % 2 != 0) throw Error(ErrorCode::ParseError, "invalid hex: odd number of digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(digits.size() / 2);
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    const int hi = nibble(digits[i]);
    const int lo = nibble(digits[i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::ParseError, "invalid hex: non-hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const auto b : bytes) out += fmt::format("{:02x}", b);
  return out;
}

}  // namespace bleloc::codec

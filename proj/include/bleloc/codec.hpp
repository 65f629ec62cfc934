#pragma once

// Beacon advertisement payload codec.
//
// A payload is the content of one AD structure, without the AD length/type
// header: manufacturer-specific data for iBeacon and AltBeacon, 16-bit UUID
// service data for Eddystone. Every multi-byte integer field is big-endian.
// Preamble bytes are fixed byte strings and are listed as such below.
//
//   iBeacon (25 bytes)
//     [0..3]   4C 00 02 15          Apple company id (LE on air), type, length
//     [4..19]  uuid
//     [20..21] major                u16
//     [22..23] minor                u16
//     [24]     measured power       i8, dBm at 1 m
//
//   Eddystone (service UUID 0xFEAA, LE on air => AA FE)
//     [0..1]   AA FE
//     [2]      frame type           00 UID, 10 URL, 20 TLM, 30 EID
//     UID (22 bytes)  [3] tx power i8 @0 m, [4..13] namespace, [14..19] instance,
//                     [20..21] reserved, must be 00 00
//     URL (5..22)     [3] tx power i8 @0 m, [4] scheme, [5..] encoded url (<= 17)
//     TLM (16 bytes)  [3] version, must be 00, [4..5] battery mV u16,
//                     [6..7] temperature i8.8 fixed point, [8..11] adv count u32,
//                     [12..15] uptime in 0.1 s u32
//     EID (12 bytes)  [3] tx power i8 @0 m, [4..11] ephemeral id
//
//   AltBeacon (26 bytes)
//     [0..1]   manufacturer id      LE on air (as carried in the AD structure)
//     [2..3]   BE AC                beacon code
//     [4..23]  beacon id
//     [24]     reference rssi       i8, dBm at 1 m
//     [25]     manufacturer reserved
//
// Eddystone URL scheme bytes: 00 "http://www.", 01 "https://www.", 02 "http://",
// 03 "https://". Expansion bytes 00..0D: ".com/" ".org/" ".edu/" ".net/"
// ".info/" ".biz/" ".gov/" ".com" ".org" ".edu" ".net" ".info" ".biz" ".gov".
// Literal url bytes are printable ASCII 0x21..0x7E; 0x0E..0x20 and 0x7F..0xFF
// are rejected. Decoding only accepts the canonical (greedy, longest-match)
// encoding so that encode(decode(p)) == p holds for every accepted payload.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bleloc::codec {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kIBeaconLength = 25;
inline constexpr std::size_t kEddystoneUidLength = 22;
inline constexpr std::size_t kEddystoneUrlMinLength = 5;
inline constexpr std::size_t kEddystoneUrlMaxLength = 22;
inline constexpr std::size_t kEddystoneUrlMaxEncoded = 17;
inline constexpr std::size_t kEddystoneTlmLength = 16;
inline constexpr std::size_t kEddystoneEidLength = 12;
inline constexpr std::size_t kAltBeaconLength = 26;

inline constexpr std::array<std::uint8_t, 4> kIBeaconPrefix = {0x4C, 0x00, 0x02, 0x15};
inline constexpr std::array<std::uint8_t, 2> kEddystoneServiceUuid = {0xAA, 0xFE};
inline constexpr std::array<std::uint8_t, 2> kAltBeaconCode = {0xBE, 0xAC};

enum class EddystoneType : std::uint8_t { Uid = 0x00, Url = 0x10, Tlm = 0x20, Eid = 0x30 };

struct IBeaconFrame {
  std::array<std::uint8_t, 16> uuid{};
  std::uint16_t major = 0;
  std::uint16_t minor = 0;
  std::int8_t measured_power_dbm = -59;

  friend bool operator==(const IBeaconFrame&, const IBeaconFrame&) = default;
};

struct EddystoneUid {
  std::int8_t tx_power_dbm = 0;
  std::array<std::uint8_t, 10> namespace_id{};
  std::array<std::uint8_t, 6> instance_id{};

  friend bool operator==(const EddystoneUid&, const EddystoneUid&) = default;
};

struct EddystoneUrl {
  std::int8_t tx_power_dbm = 0;
  // Fully expanded, e.g. "https://www.example.com/".
  std::string url;

  friend bool operator==(const EddystoneUrl&, const EddystoneUrl&) = default;
};

struct EddystoneTlm {
  std::uint16_t battery_mv = 0;
  // Raw signed 8.8 fixed point; temperature_c() converts.
  std::int16_t temperature_fixed = 0;
  std::uint32_t adv_count = 0;
  std::uint32_t uptime_deciseconds = 0;

  double temperature_c() const { return temperature_fixed / 256.0; }
  /// Rounds to the nearest 1/256 degree. Throws InvalidFrame outside [-128, 128).
  static std::int16_t temperature_to_fixed(double celsius);

  friend bool operator==(const EddystoneTlm&, const EddystoneTlm&) = default;
};

struct EddystoneEid {
  std::int8_t tx_power_dbm = 0;
  std::array<std::uint8_t, 8> ephemeral_id{};

  friend bool operator==(const EddystoneEid&, const EddystoneEid&) = default;
};

struct AltBeaconFrame {
  std::uint16_t manufacturer_id = 0x0118;
  std::array<std::uint8_t, 20> beacon_id{};
  std::int8_t reference_rssi_dbm = -59;
  std::uint8_t mfg_reserved = 0;

  friend bool operator==(const AltBeaconFrame&, const AltBeaconFrame&) = default;
};

using AdvertisementFrame = std::variant<IBeaconFrame, EddystoneUid, EddystoneUrl, EddystoneTlm,
                                        EddystoneEid, AltBeaconFrame>;

/// Throws bleloc::Error with FrameTooShort, FrameTooLong, UnknownProtocol or
/// MalformedFrame. Never reads outside `payload`.
AdvertisementFrame decode(std::span<const std::uint8_t> payload);

/// Throws InvalidFrame when the frame cannot be represented (URL too long,
/// URL with unencodable characters or an unknown scheme).
Bytes encode(const AdvertisementFrame& frame);

/// Calibrated power carried by the frame. The reference distance is 1 m for
/// iBeacon and AltBeacon and 0 m for Eddystone; see reference_distance_m.
std::optional<int> measured_power(const AdvertisementFrame& frame);
std::optional<double> reference_distance_m(const AdvertisementFrame& frame);

std::string_view variant_name(const AdvertisementFrame& frame);

/// Eddystone URL compression helpers, exposed for tests and tooling.
Bytes encode_url(std::string_view url);
std::string decode_url(std::span<const std::uint8_t> scheme_and_body);

/// Hex helpers for the CLI. parse_hex throws ParseError("invalid hex").
Bytes parse_hex(std::string_view hex);
std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace bleloc::codec

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "famix/bank/style_bank.hpp"

// Binary style-bank format, version 1. All integers and floats little-endian.
//
//   magic        8 bytes  "FAMIXSB\0"
//   version      u32      = 1
//   channels     u32
//   num_classes  u32
//   kind         u8       BankKind
//   source       u8       StyleSource
//   prompt_set   str      (u32 length + UTF-8 bytes)
//   pin_steps    u32
//   pin_step     f64
//   seed         u64
//   patches_m    u32
//   snr_db       f64
//   per class:   str name, u32 count, count x entry
//   entry:       f32[channels] mu, f32[channels] sigma, str prompt, u64 patch id,
//                f64 final cosine distance, u32 iterations
//   crc32        u32      over every preceding byte

namespace famix {

inline constexpr std::uint32_t kBankFormatVersion = 1;

std::vector<std::uint8_t> encode_bank(const StyleBank& bank);
StyleBank decode_bank(std::span<const std::uint8_t> bytes);

/// Writes the canonical encoding; identical banks produce byte-identical files.
void save_bank(const StyleBank& bank, const std::filesystem::path& path);

/// Throws LoadError naming the offending field or entry.
StyleBank load_bank(const std::filesystem::path& path);

std::uint32_t bank_checksum(std::span<const std::uint8_t> bytes);

/// Byte range of one fixed header field.
struct BankHeaderField {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

/// Locations of the header fields of an encoded bank (used by tooling and fuzz tests).
std::vector<BankHeaderField> describe_bank_header(std::span<const std::uint8_t> bytes);

}  // namespace famix

#pragma once

#include "mpmedit/material_field.hpp"

#include <string>
#include <string_view>

namespace mpmedit {

// Binary container layout (all little-endian):
//   "MPMFIELD"            8 bytes magic
//   u32 version           currently 1
//   u32 flags             bit 0: part labels present
//   u64 N
//   f64 particle_spacing
//   f64 mean[3], f64 stddev[3]   normalization constants
//   f32 positions[N][3]
//   i32 class_id[N]
//   f64 young_modulus[N], f64 poisson_ratio[N], f64 density[N]
//   i32 part_label[N]     only when flag bit 0 is set
//   u8  interior_flag[N]
inline constexpr std::string_view kFieldMagic = "MPMFIELD";
inline constexpr std::uint32_t kFieldVersion = 1;

std::string encode_field_binary(const MaterialField& field);
MaterialField decode_field_binary(std::string_view bytes, const std::string& context = "field");

std::string encode_field_json(const MaterialField& field);
MaterialField decode_field_json(std::string_view text, const std::string& context = "field");

// Dispatch on extension: ".json" selects the text form, anything else the
// binary container.
void save_field(const MaterialField& field, const std::string& path);
MaterialField load_field(const std::string& path);

}  // namespace mpmedit

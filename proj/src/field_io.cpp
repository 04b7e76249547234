#include "mpmedit/field_io.hpp"

#include "binary_io.hpp"
#include "mpmedit/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace mpmedit {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::IoError, "read failed for '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace detail

namespace {

using nlohmann::json;

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_lengths(const MaterialField& f) {
  const auto n = f.size();
  if (f.class_id.size() != n || f.young_modulus.size() != n || f.poisson_ratio.size() != n ||
      f.density.size() != n || f.interior_flag.size() != n ||
      (f.has_part_labels() && f.part_label.size() != n)) {
    fail(ErrorCode::ShapeError, "material field columns have inconsistent lengths");
  }
}

}  // namespace

std::string encode_field_binary(const MaterialField& field) {
  check_lengths(field);
  detail::ByteWriter w;
  const auto n = field.size();
  w.bytes(kFieldMagic);
  w.put<std::uint32_t>(kFieldVersion);
  w.put<std::uint32_t>(field.has_part_labels() ? 1u : 0u);
  w.put<std::uint64_t>(n);
  w.put<double>(field.particle_spacing);
  for (double m : field.normalization.mean) w.put<double>(m);
  for (double s : field.normalization.stddev) w.put<double>(s);
  for (const auto& p : field.positions) {
    for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(p[k]));
  }
  for (auto c : field.class_id) w.put<std::int32_t>(c);
  for (double v : field.young_modulus) w.put<double>(v);
  for (double v : field.poisson_ratio) w.put<double>(v);
  for (double v : field.density) w.put<double>(v);
  if (field.has_part_labels()) {
    for (auto l : field.part_label) w.put<std::int32_t>(l);
  }
  for (auto b : field.interior_flag) w.put<std::uint8_t>(b ? 1 : 0);
  return w.take();
}

MaterialField decode_field_binary(std::string_view bytes, const std::string& context) {
  detail::ByteReader r(bytes, context);
  if (r.bytes(kFieldMagic.size()) != kFieldMagic) {
    fail(ErrorCode::FormatError, context + ": bad magic, not a material field container");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kFieldVersion) {
    fail(ErrorCode::FormatError, context + ": unsupported version " + std::to_string(version));
  }
  const auto flags = r.get<std::uint32_t>();
  const auto n64 = r.get<std::uint64_t>();
  // Every point needs at least 41 bytes; reject absurd counts before allocating.
  if (n64 > r.remaining() / 41) fail(ErrorCode::FormatError, context + ": point count exceeds data");
  const auto n = static_cast<std::size_t>(n64);

  MaterialField f;
  f.particle_spacing = r.get<double>();
  for (auto& m : f.normalization.mean) m = r.get<double>();
  for (auto& s : f.normalization.stddev) s = r.get<double>();
  f.positions.resize(n);
  for (auto& p : f.positions) {
    for (int k = 0; k < 3; ++k) p[k] = static_cast<double>(r.get<float>());
  }
  f.class_id.resize(n);
  for (auto& c : f.class_id) c = r.get<std::int32_t>();
  f.young_modulus.resize(n);
  for (auto& v : f.young_modulus) v = r.get<double>();
  f.poisson_ratio.resize(n);
  for (auto& v : f.poisson_ratio) v = r.get<double>();
  f.density.resize(n);
  for (auto& v : f.density) v = r.get<double>();
  if (flags & 1u) {
    f.part_label.resize(n);
    for (auto& l : f.part_label) l = r.get<std::int32_t>();
  }
  f.interior_flag.resize(n);
  for (auto& b : f.interior_flag) b = r.get<std::uint8_t>();
  if (r.remaining() != 0) fail(ErrorCode::FormatError, context + ": trailing bytes");
  return f;
}

std::string encode_field_json(const MaterialField& field) {
  check_lengths(field);
  json j;
  j["format"] = "mpmedit.material_field";
  j["version"] = kFieldVersion;
  j["particle_spacing"] = field.particle_spacing;
  j["normalization"] = {{"mean", field.normalization.mean},
                        {"stddev", field.normalization.stddev}};
  json pos = json::array();
  for (const auto& p : field.positions) pos.push_back({p[0], p[1], p[2]});
  j["positions"] = std::move(pos);
  j["class_id"] = field.class_id;
  j["young_modulus"] = field.young_modulus;
  j["poisson_ratio"] = field.poisson_ratio;
  j["density"] = field.density;
  if (field.has_part_labels()) j["part_label"] = field.part_label;
  std::vector<int> interior(field.interior_flag.begin(), field.interior_flag.end());
  j["interior_flag"] = interior;
  return j.dump(1) + "\n";
}

MaterialField decode_field_json(std::string_view text, const std::string& context) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, context + ": " + e.what());
  }
  try {
    MaterialField f;
    if (j.value("format", std::string{}) != "mpmedit.material_field") {
      fail(ErrorCode::FormatError, context + ": missing or wrong 'format' tag");
    }
    f.particle_spacing = j.value("particle_spacing", 0.0);
    if (j.contains("normalization")) {
      f.normalization.mean = j["normalization"].at("mean").get<std::array<double, 3>>();
      f.normalization.stddev = j["normalization"].at("stddev").get<std::array<double, 3>>();
    }
    for (const auto& p : j.at("positions")) {
      const auto a = p.get<std::array<double, 3>>();
      f.positions.emplace_back(a[0], a[1], a[2]);
    }
    const auto n = f.positions.size();
    f.class_id = j.at("class_id").get<std::vector<std::int32_t>>();
    f.young_modulus = j.at("young_modulus").get<std::vector<double>>();
    f.poisson_ratio = j.at("poisson_ratio").get<std::vector<double>>();
    f.density = j.at("density").get<std::vector<double>>();
    if (j.contains("part_label")) f.part_label = j["part_label"].get<std::vector<std::int32_t>>();
    if (j.contains("interior_flag")) {
      for (int b : j["interior_flag"].get<std::vector<int>>()) f.interior_flag.push_back(b ? 1 : 0);
    } else {
      f.interior_flag.assign(n, 0);
    }
    return f;
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, context + ": " + e.what());
  }
}

void save_field(const MaterialField& field, const std::string& path) {
  detail::write_file(path, ends_with(path, ".json") ? encode_field_json(field)
                                                    : encode_field_binary(field));
}

MaterialField load_field(const std::string& path) {
  const std::string data = detail::read_file(path);
  return ends_with(path, ".json") ? decode_field_json(data, path) : decode_field_binary(data, path);
}

}  // namespace mpmedit

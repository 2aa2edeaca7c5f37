#include "pairbench/core/manifest_io.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "pairbench/core/error.hpp"

namespace pairbench {

using nlohmann::json;

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest file: " + path);

  Manifest manifest;
  manifest.name = std::filesystem::path(path).stem().string();
  std::unordered_set<std::string> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
    ImageRecord rec;
    try {
      rec.image_id = j.at("image_id").get<std::string>();
      rec.identity_id = j.at("identity_id").get<std::string>();
      rec.group = parse_group(j.at("group").get<std::string>());
      rec.masked = j.at("masked").get<bool>();
      rec.role = parse_role(j.at("role").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    } catch (const Error& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen_ids.insert(rec.image_id).second) {
      throw Error(path + ":" + std::to_string(line_no) + ": duplicate image_id '" +
                  rec.image_id + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest file: " + path);
  for (const auto& rec : manifest.records) {
    json j;
    j["image_id"] = rec.image_id;
    j["identity_id"] = rec.identity_id;
    j["group"] = to_string(rec.group);
    j["masked"] = rec.masked;
    j["role"] = to_string(rec.role);
    out << j.dump() << '\n';
  }
  if (!out) throw Error("short write to " + path);
}

}  // namespace pairbench

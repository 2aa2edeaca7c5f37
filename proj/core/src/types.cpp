#include "pairbench/core/types.hpp"

#include <unordered_set>

#include <json.hpp>

#include "pairbench/core/error.hpp"

namespace pairbench {

const char* to_string(Group g) {
  switch (g) {
    case Group::African: return "African";
    case Group::Caucasian: return "Caucasian";
    case Group::SouthAsian: return "SouthAsian";
    case Group::EastAsian: return "EastAsian";
    case Group::None: return "None";
  }
  return "None";
}

const char* to_string(Role r) {
  switch (r) {
    case Role::Probe: return "probe";
    case Role::Gallery: return "gallery";
    case Role::Any: return "any";
  }
  return "any";
}

Group parse_group(const std::string& s) {
  if (s == "African") return Group::African;
  if (s == "Caucasian") return Group::Caucasian;
  if (s == "SouthAsian") return Group::SouthAsian;
  if (s == "EastAsian") return Group::EastAsian;
  if (s == "None") return Group::None;
  throw Error("unknown group label: '" + s + "'");
}

Role parse_role(const std::string& s) {
  if (s == "probe") return Role::Probe;
  if (s == "gallery") return Role::Gallery;
  if (s == "any") return Role::Any;
  throw Error("unknown role label: '" + s + "'");
}

std::size_t Manifest::identity_count() const {
  std::unordered_set<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.insert(r.identity_id);
  return ids.size();
}

void Manifest::validate() const {
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  for (const auto& r : records) {
    if (!seen.insert(r.image_id).second) {
      throw Error("manifest '" + name + "': duplicate image_id '" + r.image_id + "'");
    }
  }
  if (records.empty()) {
    throw Error("manifest '" + name + "': no records");
  }
}

bool RecordFilter::matches(const ImageRecord& r) const {
  if (masked && r.masked != *masked) return false;
  if (groups && !groups->contains(r.group)) return false;
  if (role && r.role != Role::Any && r.role != *role) return false;
  return true;
}

void ProtocolSpec::validate() const {
  if (fpr_targets.empty()) {
    throw Error("protocol '" + name + "': no fpr targets");
  }
  for (double t : fpr_targets) {
    if (!(t > 0.0 && t < 1.0)) {
      throw Error("protocol '" + name + "': fpr target " + std::to_string(t) +
                  " outside (0,1)");
    }
  }
}

ProtocolSpec protocol_preset(const std::string& name) {
  ProtocolSpec spec;
  spec.name = name;
  if (name == "all") {
    spec.pairing = Pairing::AllPairs;
    spec.fpr_targets = {1e-3};
  } else if (name == "mr") {
    spec.pairing = Pairing::AllPairs;
    spec.fpr_targets = {1e-6};
    spec.group_breakdown = true;
  } else if (name == "masked") {
    spec.pairing = Pairing::CrossOnly;
    spec.probe_filter.masked = true;
    spec.gallery_filter.masked = false;
    spec.fpr_targets = {1e-4};
  } else {
    throw Error("unknown protocol preset: '" + name + "'");
  }
  return spec;
}

namespace {

using nlohmann::json;

RecordFilter filter_from_json(const json& j, const std::string& where) {
  RecordFilter f;
  if (!j.is_object()) throw Error("protocol: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "masked") {
      f.masked = it.value().get<bool>();
    } else if (it.key() == "groups") {
      std::set<Group> gs;
      for (const auto& g : it.value()) gs.insert(parse_group(g.get<std::string>()));
      f.groups = std::move(gs);
    } else if (it.key() == "role") {
      f.role = parse_role(it.value().get<std::string>());
    } else {
      throw Error("protocol: unknown filter key '" + it.key() + "' in " + where);
    }
  }
  return f;
}

json filter_to_json(const RecordFilter& f) {
  json j = json::object();
  if (f.masked) j["masked"] = *f.masked;
  if (f.groups) {
    json gs = json::array();
    for (Group g : *f.groups) gs.push_back(to_string(g));
    j["groups"] = gs;
  }
  if (f.role) j["role"] = to_string(*f.role);
  return j;
}

}  // namespace

ProtocolSpec parse_protocol_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("protocol: malformed JSON: ") + e.what());
  }
  ProtocolSpec spec;
  spec.name = j.value("name", "custom");
  const std::string pairing = j.value("pairing", "all_pairs");
  if (pairing == "all_pairs") {
    spec.pairing = Pairing::AllPairs;
  } else if (pairing == "cross_only") {
    spec.pairing = Pairing::CrossOnly;
  } else {
    throw Error("protocol: unknown pairing '" + pairing + "'");
  }
  if (j.contains("scope_filter")) spec.scope_filter = filter_from_json(j["scope_filter"], "scope_filter");
  if (j.contains("probe_filter")) spec.probe_filter = filter_from_json(j["probe_filter"], "probe_filter");
  if (j.contains("gallery_filter"))
    spec.gallery_filter = filter_from_json(j["gallery_filter"], "gallery_filter");
  if (j.contains("fpr_targets")) {
    for (const auto& t : j["fpr_targets"]) spec.fpr_targets.push_back(t.get<double>());
  }
  spec.group_breakdown = j.value("group_breakdown", false);
  spec.validate();
  return spec;
}

std::string protocol_to_json(const ProtocolSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["pairing"] = spec.pairing == Pairing::AllPairs ? "all_pairs" : "cross_only";
  if (!spec.scope_filter.empty()) j["scope_filter"] = filter_to_json(spec.scope_filter);
  if (!spec.probe_filter.empty()) j["probe_filter"] = filter_to_json(spec.probe_filter);
  if (!spec.gallery_filter.empty()) j["gallery_filter"] = filter_to_json(spec.gallery_filter);
  j["fpr_targets"] = spec.fpr_targets;
  j["group_breakdown"] = spec.group_breakdown;
  return j.dump(2);
}

}  // namespace pairbench

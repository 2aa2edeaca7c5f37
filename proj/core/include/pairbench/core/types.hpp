#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pairbench {

// Demographic groups follow the NIST four-group convention; None marks
// records of non-demographic sets (masked set, children set).
enum class Group : std::uint8_t { African, Caucasian, SouthAsian, EastAsian, None };

enum class Role : std::uint8_t { Probe, Gallery, Any };

constexpr std::size_t kGroupCount = 4;  // demographic groups, None excluded

const char* to_string(Group g);
const char* to_string(Role r);

// Throw Error on unknown labels; loaders never map unknown strings silently.
Group parse_group(const std::string& s);
Role parse_role(const std::string& s);

struct ImageRecord {
  std::string image_id;
  std::string identity_id;
  Group group = Group::None;
  bool masked = false;
  Role role = Role::Any;
};

// Record order is the canonical row order of the companion EmbeddingSet:
// embeddings are matched by position, never by id lookup.
struct Manifest {
  std::string name;
  std::vector<ImageRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t identity_count() const;

  // Unique image ids, at least one identity.
  void validate() const;
};

enum class Pairing : std::uint8_t { AllPairs, CrossOnly };

// Conjunction of per-field constraints; absent fields match anything.
// A record with Role::Any satisfies any requested role.
struct RecordFilter {
  std::optional<bool> masked;
  std::optional<std::set<Group>> groups;
  std::optional<Role> role;

  bool matches(const ImageRecord& r) const;
  bool empty() const { return !masked && !groups && !role; }
};

struct ProtocolSpec {
  std::string name;
  Pairing pairing = Pairing::AllPairs;
  RecordFilter scope_filter;    // subset selection, applied before pairing
  RecordFilter probe_filter;    // CrossOnly only
  RecordFilter gallery_filter;  // CrossOnly only
  std::vector<double> fpr_targets;
  bool group_breakdown = false;

  // Every fpr target strictly inside (0,1).
  void validate() const;
};

// Named presets: "all", "mr" (all-pairs + group breakdown), "masked"
// (masked probes vs non-masked gallery).
ProtocolSpec protocol_preset(const std::string& name);

// JSON (de)serialization of a protocol document; see README for the schema.
ProtocolSpec parse_protocol_json(const std::string& json_text);
std::string protocol_to_json(const ProtocolSpec& spec);

}  // namespace pairbench

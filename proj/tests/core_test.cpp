#include <doctest.h>

#include <cstring>
#include <fstream>

#include "pairbench/core/embeddings.hpp"
#include "pairbench/core/error.hpp"
#include "pairbench/core/manifest_io.hpp"
#include "pairbench/core/rng.hpp"
#include "pairbench/core/types.hpp"
#include "pairbench/syngen/syngen.hpp"
#include "testutil.hpp"

using namespace pairbench;
using testutil::TempDir;

TEST_CASE("manifest loads records in file order") {
  TempDir tmp;
  const std::string path = tmp.str("m.jsonl");
  {
    std::ofstream out(path);
    out << R"({"image_id":"x1","identity_id":"a","group":"None","masked":false,"role":"any"})" << "\n";
    out << R"({"image_id":"x2","identity_id":"a","group":"None","masked":true,"role":"probe"})" << "\n";
    out << R"({"image_id":"x3","identity_id":"b","group":"African","masked":false,"role":"gallery"})" << "\n";
  }
  const Manifest m = load_manifest(path);
  REQUIRE(m.size() == 3);
  CHECK(m.identity_count() == 2);
  CHECK(m.records[0].image_id == "x1");
  CHECK(m.records[1].masked);
  CHECK(m.records[1].role == Role::Probe);
  CHECK(m.records[2].group == Group::African);
}

TEST_CASE("manifest load errors carry context") {
  TempDir tmp;

  SUBCASE("duplicate image_id names the id") {
    const std::string path = tmp.str("dup.jsonl");
    std::ofstream(path) << R"({"image_id":"d","identity_id":"a","group":"None","masked":false,"role":"any"})"
                        << "\n"
                        << R"({"image_id":"d","identity_id":"b","group":"None","masked":false,"role":"any"})"
                        << "\n";
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("'d'"), Error);
  }
  SUBCASE("parse error reports the line number") {
    const std::string path = tmp.str("bad.jsonl");
    std::ofstream(path) << R"({"image_id":"a","identity_id":"a","group":"None","masked":false,"role":"any"})"
                        << "\n"
                        << "{not json\n";
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains(":2:"), Error);
  }
  SUBCASE("unknown group label is an error, not a fallback") {
    const std::string path = tmp.str("grp.jsonl");
    std::ofstream(path) << R"({"image_id":"a","identity_id":"a","group":"Martian","masked":false,"role":"any"})"
                        << "\n";
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("Martian"), Error);
  }
}

TEST_CASE("manifest save/load round trip") {
  TempDir tmp;
  Manifest m = testutil::random_manifest(20, 4, 3, /*with_groups=*/true, /*with_masks=*/true);
  save_manifest(m, tmp.str("rt.jsonl"));
  const Manifest back = load_manifest(tmp.str("rt.jsonl"));
  REQUIRE(back.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back.records[i].image_id == m.records[i].image_id);
    CHECK(back.records[i].identity_id == m.records[i].identity_id);
    CHECK(back.records[i].group == m.records[i].group);
    CHECK(back.records[i].masked == m.records[i].masked);
    CHECK(back.records[i].role == m.records[i].role);
  }
}

TEST_CASE("syngen-emitted manifest round trips through the loader") {
  TempDir tmp;
  syngen::SynConfig cfg;
  cfg.n_identities = 100;
  cfg.images_per_identity = {3, 3};
  cfg.dim = 8;
  const auto out = syngen::synthesize(cfg);
  save_manifest(out.manifest, tmp.str("syn.jsonl"));
  const Manifest back = load_manifest(tmp.str("syn.jsonl"));
  CHECK(back.size() == 300);
  CHECK(back.identity_count() == 100);
}

TEST_CASE("embedding file header and payload") {
  TempDir tmp;
  const std::string path = tmp.str("e.pbemb");

  SUBCASE("header N=2 D=4 plus 8 values") {
    std::ofstream out(path, std::ios::binary);
    out.write(kEmbeddingMagic, 8);
    const std::uint64_t n = 2, d = 4;
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    const float vals[8] = {1, 2, 3, 4, 5, 6, 7, 8};
    out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    out.close();
    const EmbeddingSet set = load_embeddings(path, 2);
    REQUIRE(set.rows() == 2);
    REQUIRE(set.dim() == 4);
    CHECK(set.row(1)[3] == 8.0f);
  }
  SUBCASE("row-count mismatch") {
    save_embeddings(EmbeddingSet(5, 3), path);
    CHECK_THROWS_WITH_AS(load_embeddings(path, 4), doctest::Contains("mismatch"), Error);
  }
  SUBCASE("bad magic") {
    std::ofstream(path, std::ios::binary) << "NOTMAGIC" << std::string(16, '\0');
    CHECK_THROWS_WITH_AS(load_embeddings(path, 1), doctest::Contains("magic"), Error);
  }
  SUBCASE("truncated payload") {
    std::ofstream out(path, std::ios::binary);
    out.write(kEmbeddingMagic, 8);
    const std::uint64_t n = 3, d = 4;
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    const float vals[5] = {1, 2, 3, 4, 5};  // 12 floats promised
    out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    out.close();
    CHECK_THROWS_WITH_AS(load_embeddings(path, 3), doctest::Contains("truncated"), Error);
  }
}

TEST_CASE("embedding write-then-read is bit-exact") {
  TempDir tmp;
  Philox4x32 rng(11, 0);
  std::vector<float> data(300 * 128);
  for (float& v : data) v = static_cast<float>(rng.next_gaussian() * 3.0);
  const EmbeddingSet set(300, 128, data);
  save_embeddings(set, tmp.str("rt.pbemb"));
  const EmbeddingSet back = load_embeddings(tmp.str("rt.pbemb"), 300);
  CHECK(std::memcmp(back.data().data(), data.data(), data.size() * sizeof(float)) == 0);
}

TEST_CASE("normalize maps (3,4) to (0.6,0.8)") {
  EmbeddingSet set(1, 2, {3.0f, 4.0f});
  const EmbeddingSet out = normalize(std::move(set));
  CHECK(out.row(0)[0] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(out.row(0)[1] == doctest::Approx(0.8).epsilon(1e-7));
}

TEST_CASE("normalize is idempotent within 1e-6") {
  const EmbeddingSet once = testutil::random_unit_embeddings(64, 48, 5);
  EmbeddingSet copy = once;
  const EmbeddingSet twice = normalize(std::move(copy));
  for (std::size_t i = 0; i < once.data().size(); ++i) {
    CHECK(std::abs(once.data()[i] - twice.data()[i]) <= 1e-6f);
  }
  CHECK(is_normalized(once));
  CHECK(is_normalized(twice));
}

TEST_CASE("normalize reports the zero row index") {
  EmbeddingSet set(3, 2, {1, 0, 0, 0, 0, 1});
  CHECK_THROWS_WITH_AS(normalize(std::move(set)), doctest::Contains("row 1"), Error);
}

TEST_CASE("record filters match on fields; Any role satisfies any request") {
  ImageRecord rec;
  rec.group = Group::EastAsian;
  rec.masked = true;
  rec.role = Role::Any;

  RecordFilter f;
  CHECK(f.matches(rec));  // empty filter matches everything
  f.masked = true;
  CHECK(f.matches(rec));
  f.masked = false;
  CHECK_FALSE(f.matches(rec));
  f.masked.reset();
  f.role = Role::Probe;
  CHECK(f.matches(rec));
  rec.role = Role::Gallery;
  CHECK_FALSE(f.matches(rec));
  f.role.reset();
  f.groups = std::set<Group>{Group::African};
  CHECK_FALSE(f.matches(rec));
}

TEST_CASE("protocol validation rejects out-of-range fpr targets") {
  ProtocolSpec spec = protocol_preset("all");
  spec.fpr_targets = {0.5, 1.0};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.fpr_targets = {0.0};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.fpr_targets = {1e-6};
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("protocol JSON round trip") {
  ProtocolSpec spec = protocol_preset("masked");
  spec.fpr_targets = {1e-3, 1e-4};
  spec.group_breakdown = true;
  const ProtocolSpec back = parse_protocol_json(protocol_to_json(spec));
  CHECK(back.pairing == Pairing::CrossOnly);
  CHECK(back.probe_filter.masked == true);
  CHECK(back.gallery_filter.masked == false);
  CHECK(back.fpr_targets == spec.fpr_targets);
  CHECK(back.group_breakdown);
}

TEST_CASE("philox streams are deterministic and distinct") {
  Philox4x32 a(42, 0), b(42, 0), c(42, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u32();
    CHECK(va == b.next_u32());
  }
  // Distinct streams do not collide on a prefix.
  Philox4x32 a2(42, 0);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= a2.next_u32() != c.next_u32();
  CHECK(any_diff);
}

TEST_CASE("philox gaussians replay per (seed, stream)") {
  Philox4x32 a(7, 3), b(7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_gaussian() == b.next_gaussian());
}

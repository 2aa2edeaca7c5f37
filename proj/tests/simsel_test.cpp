#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pairbench/core/error.hpp"
#include "pairbench/metrics/evaluate.hpp"
#include "pairbench/simsel/kernel.hpp"
#include "pairbench/simsel/pairs.hpp"
#include "pairbench/simsel/topk.hpp"
#include "pairbench/syngen/syngen.hpp"
#include "testutil.hpp"

using namespace pairbench;
using namespace pairbench::simsel;

namespace {

std::multiset<std::pair<std::uint32_t, std::uint32_t>> cursor_pairs(
    const Manifest& manifest, const ProtocolSpec& spec, std::size_t block_size) {
  const PairUniverse u = resolve_universe(manifest, spec);
  const PairBlockCursor cursor(u, block_size);
  std::multiset<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::size_t b = 0; b < cursor.block_count(); ++b) {
    PairBlockCursor::for_each_pair(cursor.block(b), [&](std::uint32_t i, std::uint32_t j) {
      pairs.emplace(std::min(i, j), std::max(i, j));
    });
  }
  return pairs;
}

}  // namespace

TEST_CASE("pair enumeration matches brute force for AllPairs and CrossOnly") {
  for (std::uint64_t seed : {0, 1, 2}) {
    const Manifest m =
        testutil::random_manifest(40, 5, seed, /*with_groups=*/true, /*with_masks=*/true);
    REQUIRE(m.size() <= 500);

    ProtocolSpec all = protocol_preset("all");
    ProtocolSpec masked = protocol_preset("masked");
    ProtocolSpec scoped = protocol_preset("all");
    scoped.scope_filter.groups = std::set<Group>{Group::African, Group::Caucasian};

    for (const auto& spec : {all, masked, scoped}) {
      const auto expected = testutil::brute_force_pairs(m, spec);
      for (std::size_t block_size : {1u, 16u, 128u, 1024u}) {
        CHECK(cursor_pairs(m, spec, block_size) == expected);
      }
    }
  }
}

TEST_CASE("cross protocols reject overlapping probe/gallery sets") {
  Manifest m = testutil::random_manifest(4, 3, 0);
  ProtocolSpec spec = protocol_preset("masked");
  spec.probe_filter = {};  // everything is a probe and a gallery
  spec.gallery_filter = {};
  CHECK_THROWS_WITH_AS(resolve_universe(m, spec), doctest::Contains("overlap"), Error);
}

TEST_CASE("cosine_block basics") {
  SUBCASE("identical unit vectors give 1.0") {
    const EmbeddingSet a(1, 4, {0.5f, 0.5f, 0.5f, 0.5f});
    const auto block = cosine_block(a, a);
    CHECK(block[0] == 1.0f);
  }
  SUBCASE("orthonormal basis vectors give 0.0") {
    const EmbeddingSet a(1, 3, {1, 0, 0});
    const EmbeddingSet b(1, 3, {0, 1, 0});
    CHECK(cosine_block(a, b)[0] == 0.0f);
  }
  SUBCASE("dimension mismatch is an error") {
    const EmbeddingSet a(1, 3, {1, 0, 0});
    const EmbeddingSet b(1, 4, {1, 0, 0, 0});
    CHECK_THROWS_WITH_AS(cosine_block(a, b), doctest::Contains("mismatch"), Error);
  }
}

TEST_CASE("cosine_block equals the naive per-pair dot product") {
  const EmbeddingSet a = testutil::random_unit_embeddings(7, 5, 21);
  const EmbeddingSet b = testutil::random_unit_embeddings(9, 5, 22);
  const auto block = cosine_block(a, b);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      double naive = 0.0;
      for (std::size_t t = 0; t < 5; ++t) {
        naive += static_cast<double>(a.row(i)[t]) * b.row(j)[t];
      }
      CHECK(std::abs(block[i * 9 + j] - naive) < 1e-6);
      CHECK(block[i * 9 + j] >= -1.0f - 1e-6f);
      CHECK(block[i * 9 + j] <= 1.0f + 1e-6f);
    }
  }
}

TEST_CASE("select_kth_largest on 1..100") {
  std::vector<float> scores(100);
  std::iota(scores.begin(), scores.end(), 1.0f);
  CHECK(select_kth_largest(scores, 5).kth == 96.0f);
  CHECK(select_kth_largest(scores, 1).kth == 100.0f);
}

TEST_CASE("selection equals the sort oracle on a million values") {
  Philox4x32 rng(3, 0);
  std::vector<float> scores(1'000'000);
  for (float& s : scores) s = static_cast<float>(rng.next_double() * 2.0 - 1.0);

  std::vector<float> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<float>());

  const auto result = select_kth_largest(scores, 137);
  CHECK(result.kth == sorted[136]);
  for (std::size_t i = 0; i < 137; ++i) CHECK(result.top_descending[i] == sorted[i]);
}

TEST_CASE("selection keeps ties with multiplicity") {
  const std::vector<float> scores = {5, 5, 5, 5, 3, 3, 9, 9, 1};
  const auto result = select_kth_largest(scores, 4);
  CHECK(result.kth == 5.0f);
  CHECK(result.top_descending == std::vector<float>{9, 9, 5, 5});
}

TEST_CASE("selection is independent of stream order") {
  Philox4x32 rng(17, 0);
  std::vector<float> scores(5000);
  for (float& s : scores) s = static_cast<float>(rng.next_gaussian());
  // Duplicate-heavy variant.
  for (std::size_t i = 0; i < scores.size(); i += 3) scores[i] = 0.25f;

  const auto forward = select_kth_largest(scores, 61);
  std::reverse(scores.begin(), scores.end());
  const auto backward = select_kth_largest(scores, 61);
  CHECK(forward.kth == backward.kth);
  CHECK(forward.top_descending == backward.top_descending);
}

TEST_CASE("selection errors when the stream is shorter than k") {
  const std::vector<float> scores = {1, 2, 3};
  CHECK_THROWS_WITH_AS(select_kth_largest(scores, 4), doctest::Contains("shorter"), Error);
}

TEST_CASE("merge of even/odd top-3 selections") {
  TopKSelector evens(3), odds(3);
  for (float v = 2; v <= 100; v += 2) evens.push(v);
  for (float v = 1; v <= 99; v += 2) odds.push(v);
  evens.merge(odds);
  CHECK(evens.seen() == 100);
  CHECK(evens.kth_largest() == 98.0f);
  CHECK(evens.values_descending() == std::vector<float>{100, 99, 98});
}

TEST_CASE("merging an empty selection is the identity") {
  TopKSelector s(4), empty(4);
  for (float v : {3.f, 1.f, 7.f, 5.f, 9.f}) s.push(v);
  const auto before = s.values_descending();
  s.merge(empty);
  CHECK(s.values_descending() == before);
  CHECK(s.seen() == 5);
}

TEST_CASE("merge rejects mismatched k") {
  TopKSelector a(3), b(4);
  CHECK_THROWS_WITH_AS(a.merge(b), doctest::Contains("k="), Error);
}

TEST_CASE("8-way partition merge equals the sequential pass") {
  Philox4x32 rng(23, 0);
  std::vector<float> scores(100'000);
  for (float& s : scores) s = static_cast<float>(rng.next_gaussian());

  TopKSelector sequential(50);
  for (float s : scores) sequential.push(s);

  std::vector<TopKSelector> parts(8, TopKSelector(50));
  for (std::size_t i = 0; i < scores.size(); ++i) parts[i % 8].push(scores[i]);
  const TopKSelector merged = merge_selections(parts);

  CHECK(merged.seen() == sequential.seen());
  CHECK(merged.kth_largest() == sequential.kth_largest());
  CHECK(merged.values_descending() == sequential.values_descending());
}

TEST_CASE("debug mode retains the top pairs") {
  TopKSelector sel(2, /*keep_pairs=*/true);
  sel.push(0.5f, 1, 2);
  sel.push(0.9f, 3, 4);
  sel.push(0.1f, 5, 6);
  sel.push(0.7f, 7, 8);
  const auto pairs = sel.pairs_descending();
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].row_a == 3);
  CHECK(pairs[1].row_a == 7);
}

TEST_CASE("evaluation is invariant across block sizes and worker counts") {
  syngen::SynConfig cfg;
  cfg.n_identities = 60;
  cfg.images_per_identity = {2, 6};
  cfg.dim = 48;
  cfg.intra_noise = 0.3;
  cfg.group_mix = {{0.3, 0.3, 0.2, 0.2}};
  cfg.seed = 404;
  const auto data = syngen::synthesize(cfg);

  ProtocolSpec spec = protocol_preset("mr");
  spec.fpr_targets = {1e-2, 1e-3};

  metrics::EvalOptions base;
  base.block_size = 512;
  base.workers = 1;
  const metrics::MetricReport reference = metrics::evaluate(data.embeddings, data.manifest, spec, base);

  for (std::size_t block_size : {16u, 128u, 1024u}) {
    for (std::size_t workers : {1u, 2u, 8u}) {
      metrics::EvalOptions opt;
      opt.block_size = block_size;
      opt.workers = workers;
      const auto report = metrics::evaluate(data.embeddings, data.manifest, spec, opt);
      CHECK(report == reference);
    }
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "invlab/downstream.hpp"
#include "invlab/error.hpp"
#include "invlab/rng.hpp"
#include "oracles.hpp"

using namespace invlab;

namespace {

Partition make_partition(std::vector<std::string> ids, std::vector<int> assignments) {
    Partition p;
    p.item_ids = std::move(ids);
    p.assignments = std::move(assignments);
    p.k = p.assignments.empty()
              ? 0
              : *std::max_element(p.assignments.begin(), p.assignments.end()) + 1;
    return p;
}

std::vector<std::string> numbered_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    return ids;
}

// Random partition over shared ids, with every cluster index in [0, k).
Partition random_partition(Rng& rng, std::size_t n, int k) {
    std::vector<int> a(n);
    for (auto& v : a) v = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(k)));
    return make_partition(numbered_ids(n), std::move(a));
}

// Two well-separated direction bundles with small angular noise.
SentenceEmbeddingSequence planted_points(std::uint64_t seed, std::size_t n_per,
                                         std::uint32_t d) {
    Rng rng(seed);
    SentenceEmbeddingSequence seq;
    seq.d = d;
    std::vector<float> center_a(d, 0.0f), center_b(d, 0.0f);
    center_a[0] = 1.0f;
    center_b[1] = 1.0f;
    for (std::size_t i = 0; i < 2 * n_per; ++i) {
        const auto& center = i < n_per ? center_a : center_b;
        for (std::uint32_t j = 0; j < d; ++j)
            seq.data.push_back(center[j] +
                               0.08f * static_cast<float>(rng.gaussian()));
    }
    seq.n = static_cast<std::uint32_t>(2 * n_per);
    return seq;
}

ConfigEntry make_config(std::string id, ModelGroup group, TextVersion applied,
                        std::string model = "") {
    ConfigEntry c;
    c.config_id = std::move(id);
    c.model_group = group;
    c.applied_to = applied;
    c.model_id = model.empty() ? c.config_id : std::move(model);
    return c;
}

}  // namespace

TEST_CASE("adjusted Rand index matches the contingency-table oracle") {
    Rng rng(9001);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.bounded(40);
        const int ka = 1 + static_cast<int>(rng.bounded(5));
        const int kb = 1 + static_cast<int>(rng.bounded(5));
        const Partition a = random_partition(rng, n, ka);
        const Partition b = random_partition(rng, n, kb);
        const double got = adjusted_rand_index(a, b);
        const double want = oracle::contingency_ari(a.assignments, b.assignments);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("adjusted Rand index special cases") {
    const auto ids = numbered_ids(4);
    const Partition a = make_partition(ids, {0, 0, 1, 1});

    CHECK(adjusted_rand_index(a, a) == doctest::Approx(1.0));

    // Both sides a single cluster: zero adjustment denominator reads as 1.
    const Partition ones = make_partition(ids, {0, 0, 0, 0});
    CHECK(adjusted_rand_index(ones, ones) == doctest::Approx(1.0));

    // Classic hand value: maximally disagreeing 2x2 split.
    const Partition b = make_partition(ids, {0, 1, 0, 1});
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5).epsilon(1e-12));

    // Cluster labels are nominal: renaming them changes nothing.
    const Partition renamed = make_partition(ids, {1, 1, 0, 0});
    CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(1.0));
}

TEST_CASE("adjusted Rand index aligns items by id") {
    const Partition a = make_partition({"x", "y", "z"}, {0, 0, 1});
    // Same partition, rows permuted.
    const Partition b = make_partition({"z", "x", "y"}, {1, 0, 0});
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(1.0));

    const Partition missing = make_partition({"x", "y", "w"}, {0, 0, 1});
    CHECK_THROWS_AS(adjusted_rand_index(a, missing), InputError);

    const Partition shorter = make_partition({"x", "y"}, {0, 1});
    CHECK_THROWS_AS(adjusted_rand_index(a, shorter), InputError);

    const Partition single = make_partition({"x"}, {0});
    CHECK_THROWS_AS(adjusted_rand_index(single, single), InputError);
}

TEST_CASE("macro F1 and MCC hand values") {
    const std::vector<std::string> gold = {"a", "a", "b", "b", "c"};
    const std::vector<std::string> pred = {"a", "b", "b", "b", "a"};
    // Per class: a -> P 1/2, R 1/2, F1 1/2; b -> P 2/3, R 1, F1 4/5; c -> 0.
    CHECK(macro_f1(gold, pred) ==
          doctest::Approx((0.5 + 0.8 + 0.0) / 3.0).epsilon(1e-12));
    CHECK(macro_f1(gold, gold) == doctest::Approx(1.0));

    // Classes only appearing in pred do not add terms to the mean.
    const std::vector<std::string> g2 = {"a", "a", "b"};
    const std::vector<std::string> p2 = {"a", "z", "b"};
    CHECK(macro_f1(g2, p2) ==
          doctest::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-12));

    CHECK(mcc(gold, gold) == doctest::Approx(1.0));
    // Constant prediction: zero denominator collapses to 0.
    const std::vector<std::string> flat = {"a", "a", "a", "a", "a"};
    CHECK(mcc(gold, flat) == 0.0);

    CHECK_THROWS_AS(macro_f1({}, {}), InputError);
    CHECK_THROWS_AS(macro_f1(gold, g2), InputError);
    CHECK_THROWS_AS(mcc(gold, g2), InputError);
}

TEST_CASE("macro F1 and MCC match the confusion-matrix oracles") {
    Rng rng(321);
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 3 + rng.bounded(30);
        std::vector<std::string> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = alphabet[rng.bounded(alphabet.size())];
            pred[i] = rng.uniform() < 0.6 ? gold[i]
                                          : alphabet[rng.bounded(alphabet.size())];
        }
        CHECK(macro_f1(gold, pred) ==
              doctest::Approx(oracle::confusion_macro_f1(gold, pred)).epsilon(1e-12));
        CHECK(mcc(gold, pred) ==
              doctest::Approx(oracle::confusion_mcc(gold, pred)).epsilon(1e-12));
    }
}

TEST_CASE("label alignment reorders predictions by item id") {
    LabeledItems gold;
    gold.item_ids = {"a", "b", "c"};
    gold.labels = {"x", "y", "z"};
    LabeledItems pred;
    pred.item_ids = {"c", "a", "b"};
    pred.labels = {"pz", "px", "py"};
    const auto [g, p] = align_labels(gold, pred);
    CHECK(g == std::vector<std::string>{"x", "y", "z"});
    CHECK(p == std::vector<std::string>{"px", "py", "pz"});

    pred.item_ids = {"c", "a", "q"};
    CHECK_THROWS_AS(align_labels(gold, pred), InputError);
}

TEST_CASE("spherical k-means recovers planted structure optimally") {
    for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        const SentenceEmbeddingSequence pts = planted_points(seed, 4, 4);  // n = 8
        KMeansOptions opt;
        opt.k = 2;
        opt.seed = seed;
        const Partition part = spherical_kmeans(pts, numbered_ids(pts.n), opt);

        REQUIRE(part.assignments.size() == 8);
        CHECK(part.k == 2);
        CHECK(part.assignments[0] == 0);  // canonical first-appearance labels

        const double got = oracle::assignment_objective(pts, part.assignments, 2);
        const double best = oracle::exhaustive_kmeans_objective(pts, 2);
        CHECK(got == doctest::Approx(best).epsilon(1e-9));

        // The planted split itself is recovered.
        const Partition truth =
            make_partition(numbered_ids(8), {0, 0, 0, 0, 1, 1, 1, 1});
        CHECK(adjusted_rand_index(part, truth) == doctest::Approx(1.0));
    }
}

TEST_CASE("spherical k-means is deterministic and thread independent") {
    const SentenceEmbeddingSequence pts = planted_points(5, 30, 6);  // n = 60
    KMeansOptions opt;
    opt.k = 4;
    opt.seed = 123;
    const Partition a = spherical_kmeans(pts, numbered_ids(pts.n), opt);
    const Partition b = spherical_kmeans(pts, numbered_ids(pts.n), opt);
    CHECK(a.assignments == b.assignments);

    opt.threads = 4;
    const Partition c = spherical_kmeans(pts, numbered_ids(pts.n), opt);
    CHECK(a.assignments == c.assignments);

    // Every cluster ends non-empty.
    std::set<int> used(a.assignments.begin(), a.assignments.end());
    CHECK(used.size() == 4);
    CHECK(*used.begin() == 0);
    CHECK(*used.rbegin() == 3);
}

TEST_CASE("more restarts never worsen the objective") {
    Rng noise(77);
    SentenceEmbeddingSequence pts;
    pts.n = 40;
    pts.d = 5;
    for (std::size_t i = 0; i < 40 * 5; ++i)
        pts.data.push_back(static_cast<float>(noise.gaussian()));
    KMeansOptions one;
    one.k = 5;
    one.restarts = 1;
    one.seed = 9;
    KMeansOptions many = one;
    many.restarts = 12;
    const Partition pa = spherical_kmeans(pts, {}, one);
    const Partition pb = spherical_kmeans(pts, {}, many);
    CHECK(oracle::assignment_objective(pts, pb.assignments, pb.k) >=
          oracle::assignment_objective(pts, pa.assignments, pa.k) - 1e-12);
}

TEST_CASE("spherical k-means input validation") {
    const SentenceEmbeddingSequence pts = planted_points(1, 2, 4);  // n = 4
    KMeansOptions opt;
    opt.k = 5;
    CHECK_THROWS_AS(spherical_kmeans(pts, {}, opt), InputError);

    opt.k = 1;
    const Partition whole = spherical_kmeans(pts, {}, opt);
    CHECK(whole.k == 1);
    CHECK(std::count(whole.assignments.begin(), whole.assignments.end(), 0) == 4);

    opt.k = 2;
    CHECK_THROWS_AS(spherical_kmeans(pts, {"only", "three", "ids"}, opt), InputError);

    SentenceEmbeddingSequence with_zero = pts;
    for (std::uint32_t j = 0; j < with_zero.d; ++j) with_zero.data[j] = 0.0f;
    CHECK_THROWS_AS(spherical_kmeans(with_zero, {}, opt), InputError);
}

TEST_CASE("agreement table mirrors the correlation-table labelling") {
    const auto ids = numbered_ids(6);
    const Partition p1 = make_partition(ids, {0, 0, 0, 1, 1, 1});
    const Partition p2 = make_partition(ids, {0, 0, 1, 1, 2, 2});
    const Partition p3 = make_partition(ids, {0, 1, 0, 1, 0, 1});

    const ConfigEntry o1 =
        make_config("o1", ModelGroup::original_language, TextVersion::original);
    const ConfigEntry m1 = make_config("m1", ModelGroup::multilingual,
                                       TextVersion::original, "shared");
    const ConfigEntry x1 = make_config("x1", ModelGroup::multilingual,
                                       TextVersion::translated, "shared");

    const auto table = agreement_table(
        "lang", {{&x1, &p3}, {&o1, &p1}, {&m1, &p2}});  // deliberately unsorted
    REQUIRE(table.size() == 3);
    CHECK(table[0].config_a == "m1");
    CHECK(table[0].config_b == "o1");
    CHECK(table[0].pair_type == "OM");
    CHECK_FALSE(table[0].same_model);
    CHECK(table[1].config_a == "m1");
    CHECK(table[1].config_b == "x1");
    CHECK(table[1].pair_type == "MX");
    CHECK(table[1].same_model);
    CHECK(table[2].config_a == "o1");
    CHECK(table[2].config_b == "x1");
    CHECK(table[2].pair_type == "OX");

    CHECK(table[0].value ==
          doctest::Approx(adjusted_rand_index(p2, p1)).epsilon(1e-15));
    CHECK(table[1].value ==
          doctest::Approx(adjusted_rand_index(p2, p3)).epsilon(1e-15));
    for (const auto& row : table) {
        CHECK(row.language == "lang");
        CHECK(row.n_entries == 6);
    }
}

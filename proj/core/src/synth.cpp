#include "invlab/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "invlab/corpus.hpp"
#include "invlab/error.hpp"
#include "invlab/rng.hpp"

#include <json.hpp>

namespace invlab {

namespace {

using json = nlohmann::ordered_json;

std::vector<double> unit_gaussian(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            sq += x * x;
        }
    } while (!(sq > 0.0));
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

std::vector<double> jitter(Rng& rng, const std::vector<double>& base, double scale) {
    std::vector<double> v(base.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = base[i] + scale * rng.gaussian();
        sq += v[i] * v[i];
    }
    if (!(sq > 0.0)) return unit_gaussian(rng, base.size());
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

// Random rotation: Q of a Gaussian matrix, column signs fixed by R's diagonal.
Eigen::MatrixXd random_rotation(Rng& rng, std::size_t d) {
    Eigen::MatrixXd g(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
            g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
    return q;
}

struct SynthConfig {
    std::string id;
    std::string model_id;
    ModelGroup group = ModelGroup::original_language;
    TextVersion applied_to = TextVersion::original;
    Eigen::MatrixXd rotation;
};

SentenceEmbeddingSequence render_view(const std::vector<std::vector<double>>& latents,
                                      const SynthConfig& cfg, double noise,
                                      Rng& rng) {
    const std::size_t n = latents.size();
    const std::size_t d = static_cast<std::size_t>(cfg.rotation.rows());
    SentenceEmbeddingSequence seq;
    seq.n = static_cast<std::uint32_t>(n);
    seq.d = static_cast<std::uint32_t>(d);
    seq.data.resize(n * d);
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c)
            z(static_cast<Eigen::Index>(c)) = latents[i][c];
        Eigen::VectorXd y = cfg.rotation * z;
        for (Eigen::Index c = 0; c < y.size(); ++c) y(c) += noise * rng.gaussian();
        const double norm = y.norm();
        if (!(norm > 0.0)) y.setConstant(1.0 / std::sqrt(static_cast<double>(d)));
        else y /= norm;
        for (std::size_t c = 0; c < d; ++c)
            seq.data[i * d + c] = static_cast<float>(y(static_cast<Eigen::Index>(c)));
    }
    return seq;
}

std::string language_name(int index) {
    static const char* names[] = {"alpha", "beta", "gamma", "delta", "epsilon",
                                  "zeta",  "eta",  "theta", "iota",  "kappa"};
    if (index < static_cast<int>(sizeof(names) / sizeof(names[0])))
        return names[index];
    return "lang" + std::to_string(index);
}

}  // namespace

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SynthOptions& opt) {
    if (opt.languages < 1 || opt.documents_per_language < 1 || opt.dimension < 2 ||
        opt.o_configs < 1 || opt.t_configs < 1 || opt.m_configs < 1 ||
        opt.sentences_low < 6 || opt.sentences_high < opt.sentences_low)
        throw InputError("write_synthetic_corpus: options out of range");

    std::filesystem::create_directories(dir);
    Rng rng(opt.seed);
    const std::size_t d = opt.dimension;

    // Configurations.  Multilingual models yield an original-text view (m*)
    // and a translated-text view (x*) of the same model.
    std::vector<SynthConfig> configs;
    for (int i = 1; i <= opt.o_configs; ++i)
        configs.push_back({"o" + std::to_string(i), "orig" + std::to_string(i),
                           ModelGroup::original_language, TextVersion::original,
                           random_rotation(rng, d)});
    for (int i = 1; i <= opt.t_configs; ++i)
        configs.push_back({"t" + std::to_string(i), "eng" + std::to_string(i),
                           ModelGroup::english_posttranslation, TextVersion::translated,
                           random_rotation(rng, d)});
    for (int i = 1; i <= opt.m_configs; ++i) {
        const Eigen::MatrixXd rot = random_rotation(rng, d);
        configs.push_back({"m" + std::to_string(i), "multi" + std::to_string(i),
                           ModelGroup::multilingual, TextVersion::original, rot});
        configs.push_back({"x" + std::to_string(i), "multi" + std::to_string(i),
                           ModelGroup::multilingual, TextVersion::translated, rot});
    }

    json manifest;
    manifest["languages"] = json::array();
    manifest["configs"] = json::array();
    for (const auto& c : configs) {
        json jc;
        jc["config_id"] = c.id;
        jc["model_group"] = to_string(c.group);
        jc["applied_to"] = to_string(c.applied_to);
        jc["model_id"] = c.model_id;
        manifest["configs"].push_back(jc);
    }
    manifest["documents"] = json::array();
    manifest["segmentation"] = json::object();
    manifest["alignment"] = json::object();

    for (int li = 0; li < opt.languages; ++li) {
        const std::string lang = language_name(li);
        manifest["languages"].push_back(lang);
        manifest["segmentation"][lang] = "o1";
        manifest["alignment"][lang] = {{"source", "m1"}, {"target", "x1"}};

        for (int di = 0; di < opt.documents_per_language; ++di) {
            const std::string doc_id = lang + "_doc" + std::to_string(di + 1);
            const std::string tr_id = doc_id + "_tr";
            const int span = opt.sentences_high - opt.sentences_low + 1;
            const std::size_t n_src =
                static_cast<std::size_t>(opt.sentences_low) +
                rng.bounded(static_cast<std::uint64_t>(span));

            // Planted topic segments of length >= 3.
            std::vector<std::vector<double>> src_latents;
            {
                std::size_t remaining = n_src;
                while (remaining > 0) {
                    std::size_t len = 3 + rng.bounded(5);  // 3..7
                    if (remaining < len + 3) len = remaining;
                    const std::vector<double> topic = unit_gaussian(rng, d);
                    for (std::size_t s = 0; s < len; ++s)
                        src_latents.push_back(jitter(rng, topic, opt.topic_noise));
                    remaining -= len;
                }
            }

            // Translated latents: same topics, occasional merge or split.
            std::vector<std::vector<double>> tgt_latents;
            for (std::size_t i = 0; i < src_latents.size(); ++i) {
                const double roll = rng.uniform();
                std::vector<double> z = src_latents[i];
                if (opt.translation_distortion > 0.0)
                    z = jitter(rng, z, opt.translation_distortion);
                if (roll < 0.08 && !tgt_latents.empty()) {
                    // merge into the previous translated sentence
                    auto& prev = tgt_latents.back();
                    for (std::size_t c = 0; c < d; ++c) prev[c] += z[c];
                    prev = jitter(rng, prev, 0.0);
                } else if (roll > 0.92) {
                    tgt_latents.push_back(jitter(rng, z, 0.05));  // split in two
                    tgt_latents.push_back(jitter(rng, z, 0.05));
                } else {
                    tgt_latents.push_back(std::move(z));
                }
            }
            while (tgt_latents.size() < 4)
                tgt_latents.push_back(unit_gaussian(rng, d));

            json jdoc, jtr;
            jdoc["document_id"] = doc_id;
            jdoc["language"] = lang;
            jdoc["version"] = "original";
            jdoc["embeddings"] = json::object();
            jtr["document_id"] = tr_id;
            jtr["language"] = lang;
            jtr["version"] = "translated";
            jtr["source_document"] = doc_id;
            jtr["embeddings"] = json::object();

            for (const auto& cfg : configs) {
                const bool original_side = cfg.applied_to == TextVersion::original;
                const auto& latents = original_side ? src_latents : tgt_latents;
                const std::string rel =
                    "emb/" + (original_side ? doc_id : tr_id) + "/" + cfg.id + ".emb";
                std::filesystem::create_directories((dir / rel).parent_path());
                write_embeddings(dir / rel,
                                 render_view(latents, cfg, opt.config_noise, rng));
                (original_side ? jdoc : jtr)["embeddings"][cfg.id] = rel;
            }
            manifest["documents"].push_back(jdoc);
            manifest["documents"].push_back(jtr);
        }
    }

    // Classification fixture: gold labels plus noisy per-config predictions.
    if (opt.emit_labels && opt.label_items > 1 && opt.label_classes > 1) {
        manifest["labels"] = json::object();
        for (int li = 0; li < opt.languages; ++li) {
            const std::string lang = language_name(li);
            LabeledItems gold;
            for (int i = 0; i < opt.label_items; ++i) {
                gold.item_ids.push_back("item" + std::to_string(i));
                gold.labels.push_back(
                    "c" + std::to_string(rng.bounded(
                              static_cast<std::uint64_t>(opt.label_classes))));
            }
            const std::string gold_rel = "labels/" + lang + "/gold.csv";
            std::filesystem::create_directories((dir / gold_rel).parent_path());
            write_labels(dir / gold_rel, gold);

            json jlang;
            jlang["gold"] = gold_rel;
            jlang["predictions"] = json::object();
            for (const auto& cfg : configs) {
                const double flip =
                    0.15 + (cfg.applied_to == TextVersion::translated
                                ? 0.3 * opt.translation_distortion
                                : 0.0);
                LabeledItems pred = gold;
                for (auto& label : pred.labels)
                    if (rng.uniform() < flip)
                        label = "c" + std::to_string(rng.bounded(
                                          static_cast<std::uint64_t>(opt.label_classes)));
                const std::string rel = "labels/" + lang + "/" + cfg.id + ".csv";
                write_labels(dir / rel, pred);
                jlang["predictions"][cfg.id] = rel;
            }
            manifest["labels"][lang] = jlang;
        }
    }

    const std::filesystem::path manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw InputError("cannot write " + manifest_path.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw InputError("short write to " + manifest_path.string());
    return manifest_path;
}

}  // namespace invlab

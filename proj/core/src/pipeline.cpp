#include "invlab/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "invlab/aligner.hpp"
#include "invlab/error.hpp"
#include "invlab/parallel.hpp"
#include "invlab/simcorr.hpp"

#include <json.hpp>

namespace invlab {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// logging / error context
// ---------------------------------------------------------------------------

void emit_log(const RunConfig& config, const std::string& msg) {
    if (config.log)
        config.log(msg);
    else
        std::cerr << msg << "\n";
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
    try {
        return fn();
    } catch (const DegenerateStatError&) {
        throw;  // callers handle these per observation / hypothesis
    } catch (const InputError& e) {
        throw InputError(context + ": " + e.what());
    } catch (const Error& e) {
        throw Error(context + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// content-hash stage cache
// ---------------------------------------------------------------------------

struct Hasher {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64

    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void num(double v) {
        std::uint64_t b;
        std::memcpy(&b, &v, sizeof b);
        u64(b);
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
};

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

std::string hex_key(std::uint64_t key) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(key));
    return buf;
}

// A unit of cacheable work: fresh() returns true when the stamp matches the
// recomputed input hash and every output file still exists.
class StageCache {
  public:
    StageCache(const RunConfig& config) : dir_(config.out_dir / "stamps"),
                                          force_(config.force) {
        fs::create_directories(dir_);
    }

    bool fresh(const std::string& name, std::uint64_t key,
               const std::vector<fs::path>& outputs) const {
        if (force_) return false;
        std::ifstream in(dir_ / (name + ".stamp"));
        if (!in) return false;
        std::string stored;
        in >> stored;
        if (stored != hex_key(key)) return false;
        for (const auto& p : outputs)
            if (!fs::exists(p)) return false;
        return true;
    }

    void commit(const std::string& name, std::uint64_t key) const {
        std::ofstream out(dir_ / (name + ".stamp"), std::ios::trunc);
        if (!out) throw InputError("cannot write stamp " + name);
        out << hex_key(key) << "\n";
    }

  private:
    fs::path dir_;
    bool force_ = false;
};

// ---------------------------------------------------------------------------
// intermediate (de)serialization
// ---------------------------------------------------------------------------

void save_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw InputError("short write to " + path.string());
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return j;
}

void save_segmentation(const fs::path& path, const std::string& document_id,
                       const Segmentation& seg) {
    json j;
    j["document_id"] = document_id;
    j["n"] = seg.n;
    j["penalty_used"] = seg.penalty_used;
    j["objective"] = seg.objective;
    j["change_points"] = seg.change_points;
    save_json(path, j);
}

Segmentation load_segmentation(const fs::path& path) {
    const json j = load_json(path);
    Segmentation seg;
    try {
        seg.n = j.at("n").get<std::uint32_t>();
        seg.penalty_used = j.at("penalty_used").get<double>();
        seg.objective = j.at("objective").get<double>();
        for (const auto& cp : j.at("change_points"))
            seg.change_points.push_back(cp.get<std::uint32_t>());
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return seg;
}

void save_alignment(const fs::path& path, const std::string& document_id,
                    const std::string& source_document, const AlignmentMap& map) {
    json j;
    j["document_id"] = document_id;
    j["source_document"] = source_document;
    j["n_source"] = map.n_source;
    j["n_target"] = map.n_target;
    j["total_score"] = map.total_score;
    j["links"] = json::array();
    for (const auto& link : map.links)
        j["links"].push_back({{"src_begin", link.src_begin},
                              {"src_end", link.src_end},
                              {"tgt_begin", link.tgt_begin},
                              {"tgt_end", link.tgt_end}});
    save_json(path, j);
}

AlignmentMap load_alignment(const fs::path& path) {
    const json j = load_json(path);
    AlignmentMap map;
    try {
        map.n_source = j.at("n_source").get<std::uint32_t>();
        map.n_target = j.at("n_target").get<std::uint32_t>();
        map.total_score = j.at("total_score").get<double>();
        for (const auto& jl : j.at("links")) {
            AlignmentLink link;
            link.src_begin = jl.at("src_begin").get<std::uint32_t>();
            link.src_end = jl.at("src_end").get<std::uint32_t>();
            link.tgt_begin = jl.at("tgt_begin").get<std::uint32_t>();
            link.tgt_end = jl.at("tgt_end").get<std::uint32_t>();
            map.links.push_back(link);
        }
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return map;
}

// ---------------------------------------------------------------------------
// layout / lookup helpers
// ---------------------------------------------------------------------------

fs::path segments_path(const RunConfig& c, const std::string& doc) {
    return c.out_dir / "segments" / (doc + ".json");
}
fs::path alignment_path(const RunConfig& c, const std::string& doc) {
    return c.out_dir / "alignments" / (doc + ".json");
}
fs::path paragraphs_path(const RunConfig& c, const std::string& doc,
                         const std::string& cfg) {
    return c.out_dir / "paragraphs" / doc / (cfg + ".emb");
}
fs::path simmat_path(const RunConfig& c, const std::string& lang,
                     const std::string& cfg) {
    return c.out_dir / "simmat" / lang / (cfg + ".sim");
}
fs::path correlations_path(const RunConfig& c, const std::string& lang) {
    return c.out_dir / "correlations" / (lang + ".csv");
}
fs::path warnings_path(const RunConfig& c, const std::string& lang) {
    return c.out_dir / "warnings" / (lang + ".txt");
}
fs::path partition_path(const RunConfig& c, const std::string& lang,
                        const std::string& cfg) {
    return c.out_dir / "partitions" / lang / (cfg + ".csv");
}
fs::path agreements_path(const RunConfig& c, const std::string& lang) {
    return c.out_dir / "agreements" / (lang + ".csv");
}

// The embedding file of (document, config), with pipeline-grade errors.
fs::path embedding_path(const CorpusManifest& m, const DocumentEntry& doc,
                        const std::string& config_id) {
    const auto it = doc.embeddings.find(config_id);
    if (it == doc.embeddings.end())
        throw InputError("document \"" + doc.document_id +
                         "\" declares no embeddings for config \"" + config_id +
                         "\"");
    return m.resolve(it->second);
}

// Translated counterpart required whenever translated-side configs exist.
const DocumentEntry* required_translation(const CorpusManifest& m,
                                          const DocumentEntry& original,
                                          bool needed) {
    const DocumentEntry* tr = m.translation_of(original.document_id);
    if (tr == nullptr && needed)
        throw InputError("document \"" + original.document_id +
                         "\" has no translated counterpart but translated-side "
                         "configs apply to language \"" + original.language + "\"");
    return tr;
}

const AlignmentDesignation& alignment_designation(const CorpusManifest& m,
                                                  const std::string& language) {
    const auto it = m.alignment.find(language);
    if (it == m.alignment.end())
        throw InputError("no alignment designation for language \"" + language +
                         "\"");
    return it->second;
}

const std::string& segmentation_config(const CorpusManifest& m,
                                       const std::string& language) {
    const auto it = m.segmentation.find(language);
    if (it == m.segmentation.end())
        throw InputError("no segmentation designation for language \"" + language +
                         "\"");
    return it->second;
}

std::uint64_t options_key(const RunConfig& c, const std::string& stage) {
    Hasher h;
    h.str(stage);
    if (stage == "segment") {
        h.num(c.segmenter.penalty);
        h.num(c.segmenter.fallback_penalty);
        h.num(c.segmenter.min_frac);
    } else if (stage == "align") {
        h.num(c.gap_penalty);
    } else if (stage == "pool") {
        h.num(c.pagerank.damping);
        h.num(c.pagerank.tol);
        h.u64(static_cast<std::uint64_t>(c.pagerank.max_iterations));
    } else if (stage == "cluster") {
        h.u64(static_cast<std::uint64_t>(c.kmeans.k));
        h.u64(static_cast<std::uint64_t>(c.kmeans.restarts));
        h.u64(static_cast<std::uint64_t>(c.kmeans.max_iterations));
        h.u64(c.seed);
    } else if (stage == "test") {
        for (const double k : c.kappas) h.num(k);
        h.num(c.alpha);
        h.num(c.q);
        h.u64(c.seed);
        h.u64(static_cast<std::uint64_t>(c.bootstrap_replicates));
    }
    return h.h;
}

// Cross-version harmonization: a source change point is kept only when its
// image in the translation is interior and strictly increasing; the kept set
// drives both the original-side and the translated-side segmentations, so
// every configuration of a document yields the same number of paragraphs.
std::pair<Segmentation, Segmentation> harmonize(const Segmentation& source,
                                                const AlignmentMap& alignment) {
    Segmentation src_out, tgt_out;
    src_out.n = source.n;
    src_out.penalty_used = source.penalty_used;
    src_out.objective = source.objective;
    tgt_out.n = alignment.n_target;
    tgt_out.penalty_used = source.penalty_used;
    for (const std::uint32_t tau : source.change_points) {
        const std::uint32_t image = project_source_index(alignment, tau);
        if (image > 0 && image < alignment.n_target &&
            (tgt_out.change_points.empty() || image > tgt_out.change_points.back())) {
            src_out.change_points.push_back(tau);
            tgt_out.change_points.push_back(image);
        }
    }
    return {std::move(src_out), std::move(tgt_out)};
}

// Languages that have at least one translated-side config.
bool language_has_translated_configs(const CorpusManifest& m,
                                     const std::string& language) {
    return !m.configs_for(language, TextVersion::translated).empty();
}

std::vector<std::string> paragraph_ids(const CorpusManifest& m,
                                       const std::string& language,
                                       const RunConfig& config) {
    std::vector<std::string> ids;
    for (const DocumentEntry* doc : m.originals_of(language)) {
        const Segmentation seg =
            load_segmentation(segments_path(config, doc->document_id));
        std::size_t n_paragraphs = seg.num_segments();
        if (language_has_translated_configs(m, language)) {
            const DocumentEntry* tr = required_translation(m, *doc, true);
            const AlignmentMap amap =
                load_alignment(alignment_path(config, tr->document_id));
            n_paragraphs = harmonize(seg, amap).first.num_segments();
        }
        for (std::size_t k = 0; k < n_paragraphs; ++k)
            ids.push_back(doc->document_id + "#" + std::to_string(k));
    }
    return ids;
}

// Concatenated paragraph matrix of (language, config) in original-document
// manifest order.
SentenceEmbeddingSequence load_language_paragraphs(const CorpusManifest& m,
                                                   const RunConfig& config,
                                                   const std::string& language,
                                                   const ConfigEntry& cfg) {
    SentenceEmbeddingSequence all;
    for (const DocumentEntry* doc : m.originals_of(language)) {
        const DocumentEntry* holder = doc;
        if (cfg.applied_to == TextVersion::translated)
            holder = required_translation(m, *doc, true);
        const SentenceEmbeddingSequence part = read_embeddings(
            paragraphs_path(config, holder->document_id, cfg.config_id));
        if (all.n == 0) {
            all.d = part.d;
        } else if (all.d != part.d) {
            throw InputError("config \"" + cfg.config_id +
                             "\" has inconsistent dimensions across documents");
        }
        all.n += part.n;
        all.data.insert(all.data.end(), part.data.begin(), part.data.end());
    }
    if (all.n == 0)
        throw InputError("no paragraphs for language \"" + language +
                         "\", config \"" + cfg.config_id + "\"");
    return all;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, const std::string& language,
                          Hypothesis hypothesis) {
    Hasher h;
    h.u64(base);
    h.str(language);
    h.u64(static_cast<std::uint64_t>(hypothesis));
    return h.h;
}

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

void stage_segment(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);
    const std::uint64_t params = options_key(config, "segment");

    struct Work {
        const DocumentEntry* doc;
        fs::path emb_path;
        fs::path out_path;
        std::uint64_t key;
        Segmentation result;
    };
    std::vector<Work> work;
    for (const std::string& language : m.languages) {
        const std::string& seg_cfg = segmentation_config(m, language);
        for (const DocumentEntry* doc : m.originals_of(language)) {
            with_context("[segment] language " + language + ", document " +
                             doc->document_id,
                         [&] {
                             Work w;
                             w.doc = doc;
                             w.emb_path = embedding_path(m, *doc, seg_cfg);
                             w.out_path = segments_path(config, doc->document_id);
                             Hasher h;
                             h.u64(params);
                             h.str(read_file_bytes(w.emb_path));
                             w.key = h.h;
                             if (!cache.fresh("segment-" + doc->document_id, w.key,
                                              {w.out_path}))
                                 work.push_back(std::move(w));
                         });
        }
    }

    parallel_for(work.size(), config.threads, [&](std::size_t i) {
        Work& w = work[i];
        w.result = segment_document(read_embeddings(w.emb_path), config.segmenter);
    });
    for (const Work& w : work) {
        with_context("[segment] document " + w.doc->document_id, [&] {
            save_segmentation(w.out_path, w.doc->document_id, w.result);
            cache.commit("segment-" + w.doc->document_id, w.key);
        });
    }
}

void stage_align(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);
    const std::uint64_t params = options_key(config, "align");

    struct Work {
        const DocumentEntry* original;
        const DocumentEntry* translated;
        fs::path src_path, tgt_path, out_path;
        std::uint64_t key;
        AlignmentMap result;
    };
    std::vector<Work> work;
    for (const std::string& language : m.languages) {
        if (!language_has_translated_configs(m, language)) continue;
        const AlignmentDesignation& designation = alignment_designation(m, language);
        for (const DocumentEntry* doc : m.originals_of(language)) {
            with_context("[align] language " + language + ", document " +
                             doc->document_id,
                         [&] {
                             const DocumentEntry* tr =
                                 required_translation(m, *doc, true);
                             Work w;
                             w.original = doc;
                             w.translated = tr;
                             w.src_path =
                                 embedding_path(m, *doc, designation.source_config);
                             w.tgt_path =
                                 embedding_path(m, *tr, designation.target_config);
                             w.out_path = alignment_path(config, tr->document_id);
                             Hasher h;
                             h.u64(params);
                             h.str(read_file_bytes(w.src_path));
                             h.str(read_file_bytes(w.tgt_path));
                             w.key = h.h;
                             if (!cache.fresh("align-" + tr->document_id, w.key,
                                              {w.out_path}))
                                 work.push_back(std::move(w));
                         });
        }
    }

    parallel_for(work.size(), config.threads, [&](std::size_t i) {
        Work& w = work[i];
        w.result = monotone_align(read_embeddings(w.src_path),
                                  read_embeddings(w.tgt_path), config.gap_penalty);
    });
    for (const Work& w : work) {
        with_context("[align] document " + w.translated->document_id, [&] {
            save_alignment(w.out_path, w.translated->document_id,
                           w.original->document_id, w.result);
            cache.commit("align-" + w.translated->document_id, w.key);
        });
    }
}

void stage_pool(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);
    const std::uint64_t params = options_key(config, "pool");

    struct Item {  // one (document holder, config) pooling task
        const DocumentEntry* holder;
        const ConfigEntry* cfg;
        fs::path emb_path;
        Segmentation segmentation;
        fs::path out_path;
        ParagraphEmbeddingSet result;
    };
    struct DocWork {
        std::string stamp;
        std::uint64_t key;
        std::vector<Item> items;
    };
    std::vector<DocWork> work;

    for (const std::string& language : m.languages) {
        const bool has_translated = language_has_translated_configs(m, language);
        for (const DocumentEntry* doc : m.originals_of(language)) {
            with_context("[pool] language " + language + ", document " +
                             doc->document_id,
                         [&] {
                             DocWork dw;
                             dw.stamp = "pool-" + doc->document_id;

                             const Segmentation seg = load_segmentation(
                                 segments_path(config, doc->document_id));
                             const DocumentEntry* tr =
                                 required_translation(m, *doc, has_translated);

                             Segmentation src_seg = seg, tgt_seg;
                             Hasher h;
                             h.u64(params);
                             h.str(read_file_bytes(
                                 segments_path(config, doc->document_id)));
                             if (tr != nullptr && has_translated) {
                                 const AlignmentMap amap = load_alignment(
                                     alignment_path(config, tr->document_id));
                                 h.str(read_file_bytes(
                                     alignment_path(config, tr->document_id)));
                                 std::tie(src_seg, tgt_seg) = harmonize(seg, amap);
                             }

                             std::vector<fs::path> outputs;
                             for (const ConfigEntry* cfg :
                                  m.configs_for(language)) {
                                 Item item;
                                 item.cfg = cfg;
                                 if (cfg->applied_to == TextVersion::original) {
                                     item.holder = doc;
                                     item.segmentation = src_seg;
                                 } else {
                                     item.holder = tr;
                                     item.segmentation = tgt_seg;
                                 }
                                 item.emb_path = embedding_path(m, *item.holder,
                                                                cfg->config_id);
                                 item.out_path =
                                     paragraphs_path(config,
                                                     item.holder->document_id,
                                                     cfg->config_id);
                                 h.str(read_file_bytes(item.emb_path));
                                 outputs.push_back(item.out_path);
                                 dw.items.push_back(std::move(item));
                             }
                             dw.key = h.h;
                             if (!cache.fresh(dw.stamp, dw.key, outputs))
                                 work.push_back(std::move(dw));
                         });
        }
    }

    // Flatten items for parallel pooling.
    std::vector<Item*> flat;
    for (auto& dw : work)
        for (auto& item : dw.items) flat.push_back(&item);
    parallel_for(flat.size(), config.threads, [&](std::size_t i) {
        Item& item = *flat[i];
        const SentenceEmbeddingSequence emb = read_embeddings(item.emb_path);
        const std::vector<double> weights =
            pagerank(sentence_graph(emb), config.pagerank);
        item.result = pool_document(emb, item.segmentation, weights);
        item.result.document_id = item.holder->document_id;
        item.result.config_id = item.cfg->config_id;
    });

    for (const DocWork& dw : work) {
        for (const Item& item : dw.items) {
            with_context("[pool] document " + item.holder->document_id +
                             ", config " + item.cfg->config_id,
                         [&] {
                             fs::create_directories(item.out_path.parent_path());
                             write_embeddings(item.out_path,
                                              item.result.as_sequence());
                         });
        }
        cache.commit(dw.stamp, dw.key);
    }
}

void stage_simmat(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);

    struct Work {
        std::string language;
        const ConfigEntry* cfg;
        std::string stamp;
        std::uint64_t key;
        fs::path out_path;
        SimilarityMatrix result;
    };
    std::vector<Work> work;
    for (const std::string& language : m.languages) {
        for (const ConfigEntry* cfg : m.configs_for(language)) {
            with_context(
                "[simmat] language " + language + ", config " + cfg->config_id, [&] {
                    Work w;
                    w.language = language;
                    w.cfg = cfg;
                    w.stamp = "simmat-" + language + "-" + cfg->config_id;
                    w.out_path = simmat_path(config, language, cfg->config_id);
                    Hasher h;
                    h.str("simmat");
                    for (const DocumentEntry* doc : m.originals_of(language)) {
                        const DocumentEntry* holder =
                            cfg->applied_to == TextVersion::translated
                                ? required_translation(m, *doc, true)
                                : doc;
                        h.str(read_file_bytes(paragraphs_path(
                            config, holder->document_id, cfg->config_id)));
                    }
                    w.key = h.h;
                    if (!cache.fresh(w.stamp, w.key, {w.out_path}))
                        work.push_back(std::move(w));
                });
        }
    }

    // One matrix at a time; the row loop inside similarity_matrix is the
    // parallel dimension, keeping results independent of scheduling.
    for (Work& w : work) {
        with_context(
            "[simmat] language " + w.language + ", config " + w.cfg->config_id, [&] {
                const SentenceEmbeddingSequence paragraphs =
                    load_language_paragraphs(m, config, w.language, *w.cfg);
                w.result = similarity_matrix(paragraphs, config.threads);
                fs::create_directories(w.out_path.parent_path());
                write_similarity(w.out_path, w.result);
                cache.commit(w.stamp, w.key);
            });
    }
}

void stage_correlate(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);

    for (const std::string& language : m.languages) {
        with_context("[correlate] language " + language, [&] {
            const auto configs = m.configs_for(language);
            Hasher h;
            h.str("correlate");
            for (const ConfigEntry* cfg : configs)
                h.str(read_file_bytes(
                    simmat_path(config, language, cfg->config_id)));
            const fs::path out_path = correlations_path(config, language);
            const fs::path warn_path = warnings_path(config, language);
            if (cache.fresh("correlate-" + language, h.h, {out_path, warn_path}))
                return;

            std::vector<SimilarityMatrix> matrices(configs.size());
            std::vector<std::pair<const ConfigEntry*, const SimilarityMatrix*>>
                inputs;
            for (std::size_t i = 0; i < configs.size(); ++i) {
                matrices[i] =
                    read_similarity(simmat_path(config, language,
                                                configs[i]->config_id));
                inputs.emplace_back(configs[i], &matrices[i]);
            }
            std::vector<std::string> warnings;
            const std::vector<PairObservation> observations = correlation_table(
                language, inputs, config.threads,
                [&](const std::string& msg) { warnings.push_back(msg); });

            fs::create_directories(out_path.parent_path());
            write_observations(out_path, observations);
            fs::create_directories(warn_path.parent_path());
            std::ofstream warn_out(warn_path, std::ios::trunc);
            if (!warn_out) throw InputError("cannot write " + warn_path.string());
            for (const auto& msg : warnings) warn_out << msg << "\n";
            warn_out.flush();
            if (!warn_out) throw InputError("short write to " + warn_path.string());
            for (const auto& msg : warnings) emit_log(config, "warning: " + msg);
            cache.commit("correlate-" + language, h.h);
        });
    }
}

void stage_cluster(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);
    const std::uint64_t params = options_key(config, "cluster");

    for (const std::string& language : m.languages) {
        const std::vector<std::string> ids = with_context(
            "[cluster] language " + language,
            [&] { return paragraph_ids(m, language, config); });
        for (const ConfigEntry* cfg : m.configs_for(language)) {
            with_context(
                "[cluster] language " + language + ", config " + cfg->config_id,
                [&] {
                    const fs::path out_path =
                        partition_path(config, language, cfg->config_id);
                    Hasher h;
                    h.u64(params);
                    for (const DocumentEntry* doc : m.originals_of(language)) {
                        const DocumentEntry* holder =
                            cfg->applied_to == TextVersion::translated
                                ? required_translation(m, *doc, true)
                                : doc;
                        h.str(read_file_bytes(paragraphs_path(
                            config, holder->document_id, cfg->config_id)));
                    }
                    const std::string stamp =
                        "cluster-" + language + "-" + cfg->config_id;
                    if (cache.fresh(stamp, h.h, {out_path})) return;

                    const SentenceEmbeddingSequence paragraphs =
                        load_language_paragraphs(m, config, language, *cfg);
                    KMeansOptions opt = config.kmeans;
                    opt.seed = config.seed;
                    opt.threads = config.threads;
                    if (paragraphs.n < static_cast<std::uint32_t>(opt.k)) {
                        emit_log(config, "warning: " + language + "/" +
                                             cfg->config_id + ": only " +
                                             std::to_string(paragraphs.n) +
                                             " paragraphs; clustering with k = " +
                                             std::to_string(paragraphs.n));
                        opt.k = static_cast<int>(paragraphs.n);
                    }
                    const Partition part = spherical_kmeans(paragraphs, ids, opt);

                    fs::create_directories(out_path.parent_path());
                    write_labels(out_path, to_labels(part));
                    cache.commit(stamp, h.h);
                });
        }
    }
}

void stage_agree(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);

    for (const std::string& language : m.languages) {
        with_context("[agree] language " + language, [&] {
            const auto configs = m.configs_for(language);

            // External partitions (classifier or projection outputs supplied
            // through the manifest) take precedence over computed clusterings
            // for the configurations they cover.
            std::map<std::string, fs::path> sources;
            for (const ConfigEntry* cfg : configs)
                sources[cfg->config_id] =
                    partition_path(config, language, cfg->config_id);
            const auto external = m.partitions.find(language);
            if (external != m.partitions.end())
                for (const auto& [cfg_id, rel] : external->second)
                    sources[cfg_id] = m.resolve(rel);

            Hasher h;
            h.str("agree");
            for (const auto& [cfg_id, path] : sources)
                h.str(read_file_bytes(path));
            const fs::path out_path = agreements_path(config, language);
            if (cache.fresh("agree-" + language, h.h, {out_path})) return;

            std::vector<Partition> partitions(configs.size());
            std::vector<std::pair<const ConfigEntry*, const Partition*>> inputs;
            for (std::size_t i = 0; i < configs.size(); ++i) {
                partitions[i] =
                    to_partition(read_labels(sources.at(configs[i]->config_id)));
                inputs.emplace_back(configs[i], &partitions[i]);
            }
            const std::vector<PairObservation> observations =
                agreement_table(language, inputs);
            fs::create_directories(out_path.parent_path());
            write_observations(out_path, observations);
            cache.commit("agree-" + language, h.h);
        });
    }

    // Classification metrics from gold + per-config prediction labels.
    if (!m.labels.empty()) {
        with_context("[agree] classification metrics", [&] {
            Hasher h;
            h.str("classify");
            for (const auto& [language, designation] : m.labels) {
                h.str(read_file_bytes(m.resolve(designation.gold)));
                for (const auto& [cfg_id, rel] : designation.predictions)
                    h.str(read_file_bytes(m.resolve(rel)));
            }
            const fs::path out_path =
                config.out_dir / "results" / "classification_metrics.csv";
            if (cache.fresh("classify", h.h, {out_path})) return;

            std::vector<ClassificationMetric> rows;
            for (const auto& [language, designation] : m.labels) {
                const LabeledItems gold = read_labels(m.resolve(designation.gold));
                for (const auto& [cfg_id, rel] : designation.predictions) {
                    const auto [g, p] =
                        align_labels(gold, read_labels(m.resolve(rel)));
                    ClassificationMetric row;
                    row.language = language;
                    row.config_id = cfg_id;
                    row.pipeline_type = to_char(m.config(cfg_id).pipeline_type());
                    row.f1 = macro_f1(g, p);
                    row.mcc = mcc(g, p);
                    rows.push_back(std::move(row));
                }
            }
            fs::create_directories(out_path.parent_path());
            write_classification_metrics(out_path, rows);
            cache.commit("classify", h.h);
        });
    }
}

namespace {

std::vector<HypothesisResult> test_observation_source(
    const CorpusManifest& m, const RunConfig& config,
    const std::function<fs::path(const std::string&)>& source_path,
    const std::string& source_name) {
    std::vector<HypothesisResult> all;
    for (const std::string& language : m.languages) {
        const fs::path path = source_path(language);
        if (!fs::exists(path))
            throw InputError("[test] missing " + source_name + " table " +
                             path.string() + "; run the earlier stages first");
        const std::vector<PairObservation> observations = read_observations(path);
        for (const Hypothesis hyp :
             {Hypothesis::baseline, Hypothesis::best_model, Hypothesis::multilingual,
              Hypothesis::om_ot_equivalence}) {
            HypothesisOptions opt;
            opt.kappas = config.kappas;
            opt.alpha = config.alpha;
            opt.bootstrap_replicates = config.bootstrap_replicates;
            opt.seed = derive_seed(config.seed, language, hyp);
            opt.threads = config.threads;
            try {
                auto results = run_hypothesis(language, observations, hyp, opt);
                all.insert(all.end(), results.begin(), results.end());
            } catch (const DegenerateStatError& e) {
                emit_log(config, std::string("note: skipping ") + source_name +
                                     " hypothesis: " + e.what());
            }
        }
    }
    apply_bh_adjustment(all, config.q);
    return all;
}

}  // namespace

void stage_test(const CorpusManifest& m, const RunConfig& config) {
    const StageCache cache(config);
    const std::uint64_t params = options_key(config, "test");

    Hasher h;
    h.u64(params);
    bool have_agreements = true;
    for (const std::string& language : m.languages) {
        h.str(read_file_bytes(correlations_path(config, language)));
        if (fs::exists(agreements_path(config, language)))
            h.str(read_file_bytes(agreements_path(config, language)));
        else
            have_agreements = false;
    }
    const fs::path corr_out = config.out_dir / "results" / "correlation_results.csv";
    const fs::path agree_out = config.out_dir / "results" / "agreement_results.csv";
    std::vector<fs::path> outputs = {corr_out};
    if (have_agreements) outputs.push_back(agree_out);
    if (cache.fresh("test", h.h, outputs)) return;

    fs::create_directories(corr_out.parent_path());
    const auto correlation_results = test_observation_source(
        m, config, [&](const std::string& l) { return correlations_path(config, l); },
        "correlation");
    write_results(corr_out, correlation_results);

    if (have_agreements) {
        const auto agreement_results = test_observation_source(
            m, config,
            [&](const std::string& l) { return agreements_path(config, l); },
            "agreement");
        write_results(agree_out, agreement_results);
    }
    cache.commit("test", h.h);
}

namespace {

ReportInputs gather_report_inputs(const CorpusManifest& m, const RunConfig& config) {
    ReportInputs in;
    in.languages = m.languages;
    in.parameters["penalty"] = format_double(config.segmenter.penalty);
    in.parameters["fallback_penalty"] =
        format_double(config.segmenter.fallback_penalty);
    in.parameters["min_frac"] = format_double(config.segmenter.min_frac);
    in.parameters["gap_penalty"] = format_double(config.gap_penalty);
    in.parameters["damping"] = format_double(config.pagerank.damping);
    in.parameters["alpha"] = format_double(config.alpha);
    in.parameters["q"] = format_double(config.q);
    in.parameters["seed"] = std::to_string(config.seed);
    in.parameters["bootstrap_replicates"] =
        std::to_string(config.bootstrap_replicates);
    in.parameters["k"] = std::to_string(config.kmeans.k);
    in.parameters["restarts"] = std::to_string(config.kmeans.restarts);
    {
        std::string kappas;
        for (const double k : config.kappas) {
            if (!kappas.empty()) kappas += ",";
            kappas += format_double(k);
        }
        in.parameters["kappas"] = kappas;
    }

    for (const std::string& language : m.languages) {
        in.correlations[language] =
            read_observations(correlations_path(config, language));
        const fs::path agree = agreements_path(config, language);
        if (fs::exists(agree)) in.agreements[language] = read_observations(agree);
        const fs::path warn = warnings_path(config, language);
        if (fs::exists(warn)) {
            std::ifstream win(warn);
            std::string line;
            while (std::getline(win, line))
                if (!line.empty()) in.warnings.push_back(line);
        }
    }
    in.correlation_results =
        read_results(config.out_dir / "results" / "correlation_results.csv");
    const fs::path agree_results =
        config.out_dir / "results" / "agreement_results.csv";
    if (fs::exists(agree_results)) in.agreement_results = read_results(agree_results);
    const fs::path classification =
        config.out_dir / "results" / "classification_metrics.csv";
    if (fs::exists(classification))
        in.classification = read_classification_metrics(classification);
    return in;
}

}  // namespace

void stage_report(const CorpusManifest& m, const RunConfig& config) {
    with_context("[report]", [&] {
        const ReportInputs in = gather_report_inputs(m, config);
        emit_report(config.out_dir / "report", in);
    });
}

RunOutcome collect_outcome(const CorpusManifest& m, const RunConfig& config) {
    const ReportInputs in = gather_report_inputs(m, config);
    RunOutcome outcome;
    outcome.out_dir = config.out_dir;
    outcome.warnings = in.warnings;
    outcome.correlations = in.correlations;
    outcome.agreements = in.agreements;
    outcome.correlation_results = in.correlation_results;
    outcome.agreement_results = in.agreement_results;
    outcome.classification = in.classification;
    return outcome;
}

RunOutcome run_pipeline(const RunConfig& config) {
    if (config.kappas.empty()) throw InputError("run_pipeline: no kappa values");
    const CorpusManifest m = load_manifest(config.manifest_path);
    fs::create_directories(config.out_dir);
    stage_segment(m, config);
    stage_align(m, config);
    stage_pool(m, config);
    stage_simmat(m, config);
    stage_correlate(m, config);
    stage_cluster(m, config);
    stage_agree(m, config);
    stage_test(m, config);
    stage_report(m, config);
    return collect_outcome(m, config);
}

}  // namespace invlab

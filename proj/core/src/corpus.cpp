#include "invlab/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "invlab/error.hpp"

namespace invlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// taxonomy
// ---------------------------------------------------------------------------

ModelGroup parse_model_group(const std::string& s) {
    if (s == "original_language") return ModelGroup::original_language;
    if (s == "english_posttranslation") return ModelGroup::english_posttranslation;
    if (s == "multilingual") return ModelGroup::multilingual;
    throw InputError("unknown model_group \"" + s + "\"");
}

TextVersion parse_text_version(const std::string& s) {
    if (s == "original") return TextVersion::original;
    if (s == "translated") return TextVersion::translated;
    throw InputError("unknown text version \"" + s + "\"");
}

const char* to_string(ModelGroup g) {
    switch (g) {
        case ModelGroup::original_language: return "original_language";
        case ModelGroup::english_posttranslation: return "english_posttranslation";
        case ModelGroup::multilingual: return "multilingual";
    }
    return "?";
}

const char* to_string(TextVersion v) {
    return v == TextVersion::original ? "original" : "translated";
}

char to_char(PipelineType t) {
    switch (t) {
        case PipelineType::O: return 'O';
        case PipelineType::T: return 'T';
        case PipelineType::M: return 'M';
        case PipelineType::X: return 'X';
    }
    return '?';
}

PipelineType pipeline_type_of(ModelGroup group, TextVersion applied_to) {
    switch (group) {
        case ModelGroup::original_language:
            if (applied_to == TextVersion::original) return PipelineType::O;
            throw InputError(
                "an original_language model cannot be applied to translated text");
        case ModelGroup::english_posttranslation:
            if (applied_to == TextVersion::translated) return PipelineType::T;
            throw InputError(
                "an english_posttranslation model cannot be applied to original text");
        case ModelGroup::multilingual:
            return applied_to == TextVersion::original ? PipelineType::M
                                                       : PipelineType::X;
    }
    throw InputError("invalid model group");
}

namespace {
// Precedence used to order the two letters of a pair-type label.
int type_rank(PipelineType t) {
    switch (t) {
        case PipelineType::O: return 0;
        case PipelineType::M: return 1;
        case PipelineType::X: return 2;
        case PipelineType::T: return 3;
    }
    return 4;
}
}  // namespace

std::string pair_type_label(PipelineType a, PipelineType b) {
    if (type_rank(a) > type_rank(b)) std::swap(a, b);
    return std::string{to_char(a), to_char(b)};
}

bool ConfigEntry::applies_to(const std::string& language) const {
    if (languages.empty()) return true;
    return std::find(languages.begin(), languages.end(), language) != languages.end();
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

const ConfigEntry& CorpusManifest::config(const std::string& config_id) const {
    for (const auto& c : configs)
        if (c.config_id == config_id) return c;
    throw InputError("unknown config \"" + config_id + "\"");
}

const DocumentEntry& CorpusManifest::document(const std::string& document_id) const {
    for (const auto& d : documents)
        if (d.document_id == document_id) return d;
    throw InputError("unknown document \"" + document_id + "\"");
}

std::filesystem::path CorpusManifest::resolve(const std::string& relative) const {
    std::filesystem::path p(relative);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<const DocumentEntry*> CorpusManifest::originals_of(
    const std::string& language) const {
    std::vector<const DocumentEntry*> out;
    for (const auto& d : documents)
        if (d.language == language && d.version == TextVersion::original)
            out.push_back(&d);
    return out;
}

const DocumentEntry* CorpusManifest::translation_of(
    const std::string& document_id) const {
    for (const auto& d : documents)
        if (d.version == TextVersion::translated && d.source_document == document_id)
            return &d;
    return nullptr;
}

std::vector<const ConfigEntry*> CorpusManifest::configs_for(
    const std::string& language, TextVersion version) const {
    std::vector<const ConfigEntry*> out;
    for (const auto& c : configs)
        if (c.applied_to == version && c.applies_to(language)) out.push_back(&c);
    return out;
}

std::vector<const ConfigEntry*> CorpusManifest::configs_for(
    const std::string& language) const {
    std::vector<const ConfigEntry*> out;
    for (const auto& c : configs)
        if (c.applies_to(language)) out.push_back(&c);
    return out;
}

namespace {

std::string require_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw InputError(where + ": missing string field \"" + key + "\"");
    return j.at(key).get<std::string>();
}

void validate_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
    const std::string where = path.string();
    if (m.languages.empty())
        throw InputError(where + ": manifest declares no languages");
    std::set<std::string> langs(m.languages.begin(), m.languages.end());
    if (langs.size() != m.languages.size())
        throw InputError(where + ": duplicate language codes");

    std::set<std::string> config_ids;
    for (const auto& c : m.configs) {
        if (!config_ids.insert(c.config_id).second)
            throw InputError(where + ": duplicate config \"" + c.config_id + "\"");
        (void)c.pipeline_type();  // rejects illegal group/version combinations
        for (const auto& l : c.languages)
            if (!langs.count(l))
                throw InputError(where + ": config \"" + c.config_id +
                                 "\" names undeclared language \"" + l + "\"");
    }

    std::set<std::string> doc_ids;
    for (const auto& d : m.documents) {
        const std::string ctx = where + ": document \"" + d.document_id + "\"";
        if (!doc_ids.insert(d.document_id).second)
            throw InputError(ctx + " declared twice");
        if (!langs.count(d.language))
            throw InputError(ctx + " names undeclared language \"" + d.language + "\"");
        for (const auto& [cfg_id, rel_path] : d.embeddings) {
            const ConfigEntry& c = m.config(cfg_id);  // throws if undeclared
            if (c.applied_to != d.version)
                throw InputError(ctx + ": config \"" + cfg_id + "\" applies to " +
                                 to_string(c.applied_to) + " text but the document is " +
                                 to_string(d.version));
            if (!c.applies_to(d.language))
                throw InputError(ctx + ": config \"" + cfg_id +
                                 "\" does not apply to language \"" + d.language + "\"");
            if (rel_path.empty())
                throw InputError(ctx + ": empty embedding path for \"" + cfg_id + "\"");
        }
        if (d.version == TextVersion::translated) {
            if (d.source_document.empty())
                throw InputError(ctx + ": translated document lacks source_document");
            const DocumentEntry& src = m.document(d.source_document);
            if (src.version != TextVersion::original)
                throw InputError(ctx + ": source_document \"" + d.source_document +
                                 "\" is not an original document");
            if (src.language != d.language)
                throw InputError(ctx + ": source_document language mismatch");
        } else if (!d.source_document.empty()) {
            throw InputError(ctx + ": original document must not set source_document");
        }
    }

    for (const auto& [lang, cfg_id] : m.segmentation) {
        if (!langs.count(lang))
            throw InputError(where + ": segmentation names undeclared language \"" +
                             lang + "\"");
        const ConfigEntry& c = m.config(cfg_id);
        if (c.applied_to != TextVersion::original)
            throw InputError(where + ": segmentation config \"" + cfg_id +
                             "\" must apply to original text");
        if (!c.applies_to(lang))
            throw InputError(where + ": segmentation config \"" + cfg_id +
                             "\" does not apply to \"" + lang + "\"");
    }
    for (const auto& [lang, al] : m.alignment) {
        if (!langs.count(lang))
            throw InputError(where + ": alignment names undeclared language \"" +
                             lang + "\"");
        const ConfigEntry& s = m.config(al.source_config);
        const ConfigEntry& t = m.config(al.target_config);
        if (s.applied_to != TextVersion::original)
            throw InputError(where + ": alignment source config \"" + al.source_config +
                             "\" must apply to original text");
        if (t.applied_to != TextVersion::translated)
            throw InputError(where + ": alignment target config \"" + al.target_config +
                             "\" must apply to translated text");
    }
    for (const auto& [lang, per_config] : m.partitions) {
        if (!langs.count(lang))
            throw InputError(where + ": partitions name undeclared language \"" +
                             lang + "\"");
        for (const auto& [cfg_id, p] : per_config) (void)m.config(cfg_id);
    }
    for (const auto& [lang, spec] : m.labels) {
        if (!langs.count(lang))
            throw InputError(where + ": labels name undeclared language \"" + lang +
                             "\"");
        if (spec.gold.empty())
            throw InputError(where + ": labels for \"" + lang + "\" lack gold path");
        for (const auto& [cfg_id, p] : spec.predictions) (void)m.config(cfg_id);
    }
}

}  // namespace

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError("manifest " + path.string() + ": " + e.what());
    }

    CorpusManifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path()
                                        : std::filesystem::path(".");
    const std::string where = path.string();
    try {
        for (const auto& l : j.value("languages", json::array()))
            m.languages.push_back(l.get<std::string>());
        for (const auto& jc : j.value("configs", json::array())) {
            ConfigEntry c;
            c.config_id = require_string(jc, "config_id", where);
            c.model_group = parse_model_group(require_string(jc, "model_group", where));
            c.applied_to = parse_text_version(require_string(jc, "applied_to", where));
            c.model_id = jc.value("model_id", c.config_id);
            for (const auto& l : jc.value("languages", json::array()))
                c.languages.push_back(l.get<std::string>());
            m.configs.push_back(std::move(c));
        }
        for (const auto& jd : j.value("documents", json::array())) {
            DocumentEntry d;
            d.document_id = require_string(jd, "document_id", where);
            d.language = require_string(jd, "language", where);
            d.version = parse_text_version(require_string(jd, "version", where));
            d.source_document = jd.value("source_document", "");
            // json::value() returns by value; items() must not be called on
            // the temporary or the iteration dangles.
            const json emb = jd.value("embeddings", json::object());
            for (const auto& [cfg, p] : emb.items())
                d.embeddings[cfg] = p.get<std::string>();
            m.documents.push_back(std::move(d));
        }
        const json jseg = j.value("segmentation", json::object());
        for (const auto& [lang, cfg] : jseg.items())
            m.segmentation[lang] = cfg.get<std::string>();
        const json jalign = j.value("alignment", json::object());
        for (const auto& [lang, ja] : jalign.items()) {
            AlignmentDesignation a;
            a.source_config = require_string(ja, "source", where);
            a.target_config = require_string(ja, "target", where);
            m.alignment[lang] = std::move(a);
        }
        const json jparts = j.value("partitions", json::object());
        for (const auto& [lang, jp] : jparts.items())
            for (const auto& [cfg, p] : jp.items())
                m.partitions[lang][cfg] = p.get<std::string>();
        const json jlabels = j.value("labels", json::object());
        for (const auto& [lang, jl] : jlabels.items()) {
            LabelDesignation spec;
            spec.gold = require_string(jl, "gold", where);
            const json jpred = jl.value("predictions", json::object());
            for (const auto& [cfg, p] : jpred.items())
                spec.predictions[cfg] = p.get<std::string>();
            m.labels[lang] = std::move(spec);
        }
    } catch (const json::exception& e) {
        throw InputError("manifest " + where + ": " + e.what());
    }

    validate_manifest(m, path);
    return m;
}

// ---------------------------------------------------------------------------
// binary formats
// ---------------------------------------------------------------------------

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + path.string());
}

}  // namespace

SentenceEmbeddingSequence read_embeddings(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(p, "EMB1", 4) != 0)
        throw InputError(path.string() + ": not an EMB1 embedding file");
    SentenceEmbeddingSequence seq;
    seq.n = get_u32_le(p + 4);
    seq.d = get_u32_le(p + 8);
    if (seq.n == 0 || seq.d == 0)
        throw InputError(path.string() + ": empty embedding matrix");
    const std::size_t want =
        12 + static_cast<std::size_t>(seq.n) * seq.d * sizeof(float);
    if (bytes.size() != want)
        throw InputError(path.string() + ": truncated or oversized payload (" +
                         std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(want) + ")");
    seq.data.resize(static_cast<std::size_t>(seq.n) * seq.d);
    for (std::size_t i = 0; i < seq.data.size(); ++i)
        seq.data[i] = std::bit_cast<float>(get_u32_le(p + 12 + i * 4));
    for (std::uint32_t r = 0; r < seq.n; ++r) {
        bool all_zero = true;
        for (std::uint32_t c = 0; c < seq.d; ++c) {
            const float v = seq.data[static_cast<std::size_t>(r) * seq.d + c];
            if (!std::isfinite(v))
                throw InputError(path.string() + ": non-finite value in row " +
                                 std::to_string(r));
            if (v != 0.0f) all_zero = false;
        }
        if (all_zero)
            throw InputError(path.string() + ": zero-norm row " + std::to_string(r));
    }
    return seq;
}

void write_embeddings(const std::filesystem::path& path,
                      const SentenceEmbeddingSequence& seq) {
    if (seq.n == 0 || seq.d == 0)
        throw InputError("refusing to write empty embedding matrix to " + path.string());
    if (seq.data.size() != static_cast<std::size_t>(seq.n) * seq.d)
        throw InputError("embedding shape mismatch writing " + path.string());
    std::string bytes;
    bytes.reserve(12 + seq.data.size() * 4);
    bytes.append("EMB1", 4);
    put_u32_le(bytes, seq.n);
    put_u32_le(bytes, seq.d);
    for (std::uint32_t r = 0; r < seq.n; ++r) {
        bool all_zero = true;
        for (std::uint32_t c = 0; c < seq.d; ++c) {
            const float v = seq.data[static_cast<std::size_t>(r) * seq.d + c];
            if (!std::isfinite(v))
                throw InputError("non-finite value in row " + std::to_string(r) +
                                 " writing " + path.string());
            if (v != 0.0f) all_zero = false;
            put_u32_le(bytes, std::bit_cast<std::uint32_t>(v));
        }
        if (all_zero)
            throw InputError("zero-norm row " + std::to_string(r) + " writing " +
                             path.string());
    }
    spit(path, bytes);
}

SimilarityMatrix read_similarity(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 8 || std::memcmp(p, "SIM1", 4) != 0)
        throw InputError(path.string() + ": not a SIM1 similarity file");
    SimilarityMatrix m;
    m.n_paragraphs = get_u32_le(p + 4);
    const std::size_t tri = SimilarityMatrix::tri_size(m.n_paragraphs);
    if (bytes.size() != 8 + tri * sizeof(float))
        throw InputError(path.string() + ": truncated or oversized payload");
    m.upper.resize(tri);
    for (std::size_t i = 0; i < tri; ++i)
        m.upper[i] = std::bit_cast<float>(get_u32_le(p + 8 + i * 4));
    return m;
}

void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& m) {
    if (m.upper.size() != SimilarityMatrix::tri_size(m.n_paragraphs))
        throw InputError("similarity triangle length mismatch writing " + path.string());
    std::string bytes;
    bytes.reserve(8 + m.upper.size() * 4);
    bytes.append("SIM1", 4);
    put_u32_le(bytes, m.n_paragraphs);
    for (const float v : m.upper) put_u32_le(bytes, std::bit_cast<std::uint32_t>(v));
    spit(path, bytes);
}

// ---------------------------------------------------------------------------
// label files
// ---------------------------------------------------------------------------

LabeledItems read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    LabeledItems items;
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 == line.size())
            throw InputError(path.string() + ":" + std::to_string(lineno) +
                             ": expected \"item_id,label\"");
        std::string id = line.substr(0, comma);
        if (!seen.insert(id).second)
            throw InputError(path.string() + ":" + std::to_string(lineno) +
                             ": duplicate item \"" + id + "\"");
        items.item_ids.push_back(std::move(id));
        items.labels.push_back(line.substr(comma + 1));
    }
    if (items.item_ids.empty())
        throw InputError(path.string() + ": no labeled items");
    return items;
}

void write_labels(const std::filesystem::path& path, const LabeledItems& items) {
    if (items.item_ids.size() != items.labels.size())
        throw InputError("label shape mismatch writing " + path.string());
    std::string out;
    for (std::size_t i = 0; i < items.item_ids.size(); ++i) {
        const std::string& id = items.item_ids[i];
        const std::string& label = items.labels[i];
        if (id.find_first_of(",\n\r") != std::string::npos ||
            label.find_first_of(",\n\r") != std::string::npos)
            throw InputError("item id or label contains a delimiter writing " +
                             path.string());
        out += id;
        out += ',';
        out += label;
        out += '\n';
    }
    spit(path, out);
}

Partition to_partition(const LabeledItems& items) {
    Partition p;
    p.item_ids = items.item_ids;
    p.assignments.reserve(items.labels.size());
    std::map<std::string, int> index;
    for (const auto& label : items.labels) {
        auto [it, inserted] = index.emplace(label, static_cast<int>(index.size()));
        p.assignments.push_back(it->second);
    }
    p.k = static_cast<int>(index.size());
    return p;
}

LabeledItems to_labels(const Partition& partition) {
    LabeledItems items;
    items.item_ids = partition.item_ids;
    items.labels.reserve(partition.assignments.size());
    for (const int a : partition.assignments)
        items.labels.push_back(std::to_string(a));
    return items;
}

}  // namespace invlab

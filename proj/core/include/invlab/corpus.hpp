#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace invlab {

// ---------------------------------------------------------------------------
// Configuration taxonomy
// ---------------------------------------------------------------------------
//
// An embedding configuration is a model group applied to one text version.
// The combination determines the pipeline type used throughout the analysis:
//
//   original_language      x original   -> O
//   english_posttranslation x translated -> T
//   multilingual           x original   -> M
//   multilingual           x translated -> X
//
// The two remaining combinations are rejected: an original-language model
// cannot run on translated text, and a post-translation English model cannot
// run on untranslated text.

enum class ModelGroup { original_language, english_posttranslation, multilingual };
enum class TextVersion { original, translated };
enum class PipelineType { O, T, M, X };

ModelGroup parse_model_group(const std::string& s);
TextVersion parse_text_version(const std::string& s);
const char* to_string(ModelGroup g);
const char* to_string(TextVersion v);
char to_char(PipelineType t);

// Throws InputError for the two illegal (group, version) combinations.
PipelineType pipeline_type_of(ModelGroup group, TextVersion applied_to);

// Canonical unordered pair-type label.  Letters are emitted in the fixed
// precedence O < M < X < T, which yields the ten labels
// OO OM OX OT MM MX MT XX XT TT.
std::string pair_type_label(PipelineType a, PipelineType b);

struct ConfigEntry {
    std::string config_id;
    ModelGroup model_group = ModelGroup::original_language;
    TextVersion applied_to = TextVersion::original;
    // Underlying model identity; two configs with equal model_id are the same
    // model applied to different text versions.  Defaults to config_id.
    std::string model_id;
    // Languages this config applies to; empty means every language.
    std::vector<std::string> languages;

    PipelineType pipeline_type() const {
        return pipeline_type_of(model_group, applied_to);
    }
    bool applies_to(const std::string& language) const;
};

struct DocumentEntry {
    std::string document_id;
    std::string language;
    TextVersion version = TextVersion::original;
    // For translated documents: the document_id of the original they render.
    std::string source_document;
    // config_id -> embedding file path (relative to the manifest directory).
    std::map<std::string, std::string> embeddings;
};

struct AlignmentDesignation {
    std::string source_config;  // applied to the original text
    std::string target_config;  // applied to the translated text
};

struct LabelDesignation {
    std::string gold;                                  // path to gold labels
    std::map<std::string, std::string> predictions;    // config_id -> path
};

struct CorpusManifest {
    std::filesystem::path base_dir;  // directory of the manifest file
    std::vector<std::string> languages;
    std::vector<ConfigEntry> configs;
    std::vector<DocumentEntry> documents;
    // language -> config used to segment the original documents
    std::map<std::string, std::string> segmentation;
    // language -> configs providing the shared bilingual space for alignment
    std::map<std::string, AlignmentDesignation> alignment;
    // Optional downstream inputs.
    std::map<std::string, std::map<std::string, std::string>> partitions;
    std::map<std::string, LabelDesignation> labels;

    const ConfigEntry& config(const std::string& config_id) const;
    const DocumentEntry& document(const std::string& document_id) const;
    std::filesystem::path resolve(const std::string& relative) const;

    // Original documents of `language`, in manifest order.
    std::vector<const DocumentEntry*> originals_of(const std::string& language) const;
    // Translated counterpart of an original document (nullptr if none).
    const DocumentEntry* translation_of(const std::string& document_id) const;
    // Configs applicable to (language, version), in manifest order.
    std::vector<const ConfigEntry*> configs_for(const std::string& language,
                                                TextVersion version) const;
    // All configs applicable to the language (both versions), manifest order.
    std::vector<const ConfigEntry*> configs_for(const std::string& language) const;
};

// Parses and validates a manifest (JSON).  Throws InputError with the
// offending path / id in the message.
CorpusManifest load_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sentence embeddings
// ---------------------------------------------------------------------------
//
// Binary layout (little-endian): magic "EMB1", u32 n, u32 d, then n*d float32
// values row-major.  Readers reject wrong magic, truncation, non-finite
// values and zero-norm rows, naming the row index.

struct SentenceEmbeddingSequence {
    std::uint32_t n = 0;
    std::uint32_t d = 0;
    std::vector<float> data;  // row-major n x d

    std::span<const float> row(std::size_t i) const {
        return {data.data() + i * d, d};
    }
};

SentenceEmbeddingSequence read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path,
                      const SentenceEmbeddingSequence& seq);

// ---------------------------------------------------------------------------
// Similarity matrices
// ---------------------------------------------------------------------------
//
// Only the strict upper triangle is stored, row-major: (0,1), (0,2), ...,
// (n-2,n-1).  Binary layout: magic "SIM1", u32 n, n*(n-1)/2 float32 values.
// Write/read round-trips are bit-exact.

struct SimilarityMatrix {
    std::uint32_t n_paragraphs = 0;
    std::vector<float> upper;  // length n*(n-1)/2

    static std::size_t tri_size(std::size_t n) { return n * (n - 1) / 2; }
    // Index of (i, j) with i < j in the flattened upper triangle.
    std::size_t tri_index(std::size_t i, std::size_t j) const {
        return i * (2 * n_paragraphs - i - 1) / 2 + (j - i - 1);
    }
    float at(std::size_t i, std::size_t j) const { return upper[tri_index(i, j)]; }
};

SimilarityMatrix read_similarity(const std::filesystem::path& path);
void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& m);

// ---------------------------------------------------------------------------
// Partitions / labels
// ---------------------------------------------------------------------------
//
// Label files are delimited text, one "item_id,label" record per line.

struct LabeledItems {
    std::vector<std::string> item_ids;
    std::vector<std::string> labels;
};

struct Partition {
    std::vector<std::string> item_ids;
    std::vector<int> assignments;  // cluster index per item, in [0, k)
    int k = 0;
};

LabeledItems read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabeledItems& items);

// Maps label strings to dense cluster indices by first appearance.
Partition to_partition(const LabeledItems& items);
LabeledItems to_labels(const Partition& partition);

}  // namespace invlab

#pragma once

#include <cstdint>
#include <filesystem>

namespace invlab {

// Deterministic synthetic bilingual corpus for smoke tests and demos.
//
// Latent sentence topics are shared across every configuration of a document;
// each configuration views them through its own orthogonal rotation (which
// preserves all cosine structure) plus isotropic noise, so pairwise-similarity
// structure is invariant across configurations by construction.  Translated
// versions reuse the original latents with occasional sentence splits/merges;
// `translation_distortion` adds extra noise to the translated view only,
// planting a real invariance violation when > 0.

struct SynthOptions {
    std::uint64_t seed = 7;
    int languages = 2;
    int documents_per_language = 6;  // originals; each gets one translation
    int sentences_low = 18;
    int sentences_high = 28;
    std::uint32_t dimension = 16;
    int o_configs = 3;  // original-language models
    int t_configs = 3;  // post-translation English models
    int m_configs = 3;  // multilingual models; each yields a translated twin
    double topic_noise = 0.25;            // within-segment sentence jitter
    double config_noise = 0.12;           // per-configuration view noise
    double translation_distortion = 0.0;  // extra noise on translated latents
    bool emit_labels = true;              // classification fixture per language
    int label_items = 60;
    int label_classes = 4;
};

// Writes embeddings, label files and manifest.json under `dir` (created if
// needed) and returns the manifest path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SynthOptions& opt = {});

}  // namespace invlab

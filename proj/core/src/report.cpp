#include "invlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "invlab/error.hpp"

#include <json.hpp>

namespace invlab {

namespace {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// csv plumbing
// ---------------------------------------------------------------------------

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

// Full-file record parser: quoted fields may contain commas, quotes ("")
// and newlines.  Records separated by \n or \r\n; blank lines are skipped.
std::vector<std::vector<std::string>> csv_records(const std::string& text,
                                                  const std::string& where) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string cur;
    bool quoted = false;
    bool started = false;  // current record has any content (field byte or comma)
    const auto end_record = [&] {
        if (!started) return;
        rec.push_back(std::move(cur));
        cur.clear();
        records.push_back(std::move(rec));
        rec.clear();
        started = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
            started = true;
        } else if (c == ',') {
            rec.push_back(std::move(cur));
            cur.clear();
            started = true;
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else {
            cur += c;
            started = true;
        }
    }
    if (quoted) throw InputError(where + ": unterminated quote");
    end_record();
    return records;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path,
                  const std::vector<std::string>& expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    auto records = csv_records(text, path.string());
    if (records.empty()) throw InputError(path.string() + ": empty file");
    CsvTable table;
    table.header = std::move(records.front());
    if (table.header != expected_header)
        throw InputError(path.string() + ": unexpected header");
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != expected_header.size())
            throw InputError(path.string() + ": row with " +
                             std::to_string(records[r].size()) +
                             " fields, expected " +
                             std::to_string(expected_header.size()));
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
        if (!out_) throw InputError("cannot write " + path.string());
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_escape(fields[i]);
        }
        out_ << '\n';
    }
    void close() {
        out_.flush();
        if (!out_) throw InputError("short write to " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

std::uint32_t parse_u32(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const unsigned long v = std::stoul(s, &pos);
        if (pos != s.size()) throw InputError("");
        return static_cast<std::uint32_t>(v);
    } catch (...) {
        throw InputError(where + ": bad integer \"" + s + "\"");
    }
}

Backend parse_backend(const std::string& s, const std::string& where) {
    if (s == "mixed_model") return Backend::mixed_model;
    if (s == "bootstrap") return Backend::bootstrap;
    throw InputError(where + ": unknown backend \"" + s + "\"");
}

PipelineType pipeline_type_from_char(const std::string& s, const std::string& where) {
    if (s.size() == 1) {
        switch (s[0]) {
            case 'O': return PipelineType::O;
            case 'T': return PipelineType::T;
            case 'M': return PipelineType::M;
            case 'X': return PipelineType::X;
            default: break;
        }
    }
    throw InputError(where + ": unknown pipeline type \"" + s + "\"");
}

const std::vector<std::string> kPairTypeOrder = {
    "OO", "OM", "OX", "OT", "MM", "MX", "MT", "XX", "XT", "TT"};

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        throw InputError("bad number \"" + s + "\"");
    return v;
}

// ---------------------------------------------------------------------------
// verdict tables
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kVerdictHeader = {
    "language", "n",        "n_O",     "n_T",     "d_hat",      "ci_lo",
    "ci_hi",    "p",        "decision", "backend", "bh_decision"};
}

VerdictRow to_verdict_row(const HypothesisResult& r) {
    VerdictRow row;
    row.language = r.language;
    row.n = r.n_ordered_pairs;
    row.n_o = r.n_o_configs;
    row.n_t = r.n_t_configs;
    row.d_hat = r.d_hat;
    row.ci_lo = r.ci_lo;
    row.ci_hi = r.ci_hi;
    row.p = r.p_inv;
    row.decision = r.decision;
    row.backend = r.backend;
    row.bh_decision = r.bh_decision;
    return row;
}

void write_verdict_table(const std::filesystem::path& path,
                         const std::vector<VerdictRow>& rows) {
    CsvWriter w(path);
    w.row(kVerdictHeader);
    for (const auto& r : rows)
        w.row({r.language, std::to_string(r.n), std::to_string(r.n_o),
               std::to_string(r.n_t), format_double(r.d_hat), format_double(r.ci_lo),
               format_double(r.ci_hi), format_double(r.p), to_string(r.decision),
               to_string(r.backend), to_string(r.bh_decision)});
    w.close();
}

std::vector<VerdictRow> read_verdict_table(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path, kVerdictHeader);
    std::vector<VerdictRow> rows;
    rows.reserve(table.rows.size());
    for (const auto& f : table.rows) {
        VerdictRow r;
        r.language = f[0];
        r.n = parse_u32(f[1], path.string());
        r.n_o = parse_u32(f[2], path.string());
        r.n_t = parse_u32(f[3], path.string());
        r.d_hat = parse_double(f[4]);
        r.ci_lo = parse_double(f[5]);
        r.ci_hi = parse_double(f[6]);
        r.p = parse_double(f[7]);
        r.decision = parse_decision(f[8]);
        r.backend = parse_backend(f[9], path.string());
        r.bh_decision = parse_decision(f[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// sweep counts
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kSweepHeader = {
    "hypothesis", "kappa", "invariant", "indeterminate", "distorted", "superior"};
}

std::vector<SweepCounts> sweep_counts(const std::vector<HypothesisResult>& results,
                                      bool adjusted) {
    std::map<std::pair<int, double>, SweepCounts> by_group;
    for (const auto& r : results) {
        SweepCounts& c = by_group[{static_cast<int>(r.hypothesis), r.kappa}];
        c.hypothesis = r.hypothesis;
        c.kappa = r.kappa;
        switch (adjusted ? r.bh_decision : r.decision) {
            case Decision::invariant:
            case Decision::equivalent: ++c.invariant; break;
            case Decision::indeterminate: ++c.indeterminate; break;
            case Decision::distorted:
            case Decision::inferior: ++c.distorted; break;
            case Decision::superior: ++c.superior; break;
        }
    }
    std::vector<SweepCounts> out;
    out.reserve(by_group.size());
    for (const auto& [key, counts] : by_group) out.push_back(counts);
    return out;
}

void write_sweep_counts(const std::filesystem::path& path,
                        const std::vector<SweepCounts>& rows) {
    CsvWriter w(path);
    w.row(kSweepHeader);
    for (const auto& r : rows)
        w.row({to_string(r.hypothesis), format_double(r.kappa),
               std::to_string(r.invariant), std::to_string(r.indeterminate),
               std::to_string(r.distorted), std::to_string(r.superior)});
    w.close();
}

std::vector<SweepCounts> read_sweep_counts(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path, kSweepHeader);
    std::vector<SweepCounts> rows;
    for (const auto& f : table.rows) {
        SweepCounts r;
        r.hypothesis = parse_hypothesis(f[0]);
        r.kappa = parse_double(f[1]);
        r.invariant = parse_u32(f[2], path.string());
        r.indeterminate = parse_u32(f[3], path.string());
        r.distorted = parse_u32(f[4], path.string());
        r.superior = parse_u32(f[5], path.string());
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// observations / results
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kObsHeader = {
    "language", "config_a", "config_b", "pair_type", "same_model",
    "value",    "n_entries", "type_a",  "type_b"};
const std::vector<std::string> kResultHeader = {
    "language",     "hypothesis",      "kappa",        "sigma_marginal",
    "delta",        "d_hat",           "se",           "ci_lo",
    "ci_hi",        "p_inv",           "p_dist",       "decision",
    "bh_decision",  "backend",         "fit_converged", "n_observations",
    "n_ordered_pairs", "n_ref_configs", "n_cand_configs", "n_o_configs",
    "n_t_configs",  "best_candidate_config"};
}  // namespace

void write_observations(const std::filesystem::path& path,
                        const std::vector<PairObservation>& observations) {
    CsvWriter w(path);
    w.row(kObsHeader);
    for (const auto& o : observations)
        w.row({o.language, o.config_a, o.config_b, o.pair_type,
               o.same_model ? "true" : "false", format_double(o.value),
               std::to_string(o.n_entries), std::string(1, to_char(o.type_a)),
               std::string(1, to_char(o.type_b))});
    w.close();
}

std::vector<PairObservation> read_observations(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path, kObsHeader);
    std::vector<PairObservation> out;
    out.reserve(table.rows.size());
    for (const auto& f : table.rows) {
        PairObservation o;
        o.language = f[0];
        o.config_a = f[1];
        o.config_b = f[2];
        o.pair_type = f[3];
        o.same_model = f[4] == "true";
        o.value = parse_double(f[5]);
        o.n_entries = parse_u32(f[6], path.string());
        o.type_a = pipeline_type_from_char(f[7], path.string());
        o.type_b = pipeline_type_from_char(f[8], path.string());
        out.push_back(std::move(o));
    }
    return out;
}

void write_results(const std::filesystem::path& path,
                   const std::vector<HypothesisResult>& results) {
    CsvWriter w(path);
    w.row(kResultHeader);
    for (const auto& r : results)
        w.row({r.language,
               to_string(r.hypothesis),
               format_double(r.kappa),
               format_double(r.sigma_marginal),
               format_double(r.delta),
               format_double(r.d_hat),
               format_double(r.se),
               format_double(r.ci_lo),
               format_double(r.ci_hi),
               format_double(r.p_inv),
               format_double(r.p_dist),
               to_string(r.decision),
               to_string(r.bh_decision),
               to_string(r.backend),
               r.fit_converged ? "true" : "false",
               std::to_string(r.n_observations),
               std::to_string(r.n_ordered_pairs),
               std::to_string(r.n_ref_configs),
               std::to_string(r.n_cand_configs),
               std::to_string(r.n_o_configs),
               std::to_string(r.n_t_configs),
               r.best_candidate_config});
    w.close();
}

std::vector<HypothesisResult> read_results(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path, kResultHeader);
    std::vector<HypothesisResult> out;
    out.reserve(table.rows.size());
    for (const auto& f : table.rows) {
        HypothesisResult r;
        r.language = f[0];
        r.hypothesis = parse_hypothesis(f[1]);
        r.kappa = parse_double(f[2]);
        r.sigma_marginal = parse_double(f[3]);
        r.delta = parse_double(f[4]);
        r.d_hat = parse_double(f[5]);
        r.se = parse_double(f[6]);
        r.ci_lo = parse_double(f[7]);
        r.ci_hi = parse_double(f[8]);
        r.p_inv = parse_double(f[9]);
        r.p_dist = parse_double(f[10]);
        r.decision = parse_decision(f[11]);
        r.bh_decision = parse_decision(f[12]);
        r.backend = parse_backend(f[13], path.string());
        r.fit_converged = f[14] == "true";
        r.n_observations = parse_u32(f[15], path.string());
        r.n_ordered_pairs = parse_u32(f[16], path.string());
        r.n_ref_configs = parse_u32(f[17], path.string());
        r.n_cand_configs = parse_u32(f[18], path.string());
        r.n_o_configs = parse_u32(f[19], path.string());
        r.n_t_configs = parse_u32(f[20], path.string());
        r.best_candidate_config = f[21];
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// heatmap / classification
// ---------------------------------------------------------------------------

void write_heatmap(const std::filesystem::path& path,
                   const std::map<std::string, std::map<std::string, double>>&
                       means_by_language) {
    CsvWriter w(path);
    std::vector<std::string> header = {"language"};
    header.insert(header.end(), kPairTypeOrder.begin(), kPairTypeOrder.end());
    w.row(header);
    for (const auto& [language, means] : means_by_language) {
        std::vector<std::string> row = {language};
        for (const auto& type : kPairTypeOrder) {
            const auto it = means.find(type);
            row.push_back(it == means.end() ? "" : format_double(it->second));
        }
        w.row(row);
    }
    w.close();
}

namespace {
const std::vector<std::string> kClassificationHeader = {
    "language", "config_id", "pipeline_type", "macro_f1", "mcc"};
}

void write_classification_metrics(const std::filesystem::path& path,
                                  const std::vector<ClassificationMetric>& rows) {
    CsvWriter w(path);
    w.row(kClassificationHeader);
    for (const auto& r : rows)
        w.row({r.language, r.config_id, std::string(1, r.pipeline_type),
               format_double(r.f1), format_double(r.mcc)});
    w.close();
}

std::vector<ClassificationMetric> read_classification_metrics(
    const std::filesystem::path& path) {
    const CsvTable table = read_csv(path, kClassificationHeader);
    std::vector<ClassificationMetric> out;
    for (const auto& f : table.rows) {
        ClassificationMetric m;
        m.language = f[0];
        m.config_id = f[1];
        if (f[2].size() != 1)
            throw InputError(path.string() + ": bad pipeline type \"" + f[2] + "\"");
        m.pipeline_type = f[2][0];
        m.f1 = parse_double(f[3]);
        m.mcc = parse_double(f[4]);
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// full report
// ---------------------------------------------------------------------------

namespace {

json counts_json(const std::vector<SweepCounts>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json jr;
        jr["hypothesis"] = to_string(r.hypothesis);
        jr["kappa"] = r.kappa;
        jr["invariant"] = r.invariant;
        jr["indeterminate"] = r.indeterminate;
        jr["distorted"] = r.distorted;
        jr["superior"] = r.superior;
        arr.push_back(jr);
    }
    return arr;
}

void emit_source(const std::filesystem::path& dir, const std::string& name,
                 const std::vector<HypothesisResult>& results, json& summary) {
    if (results.empty()) return;
    std::filesystem::create_directories(dir / name);

    // group rows per (hypothesis, kappa)
    std::map<std::pair<int, double>, std::vector<VerdictRow>> tables;
    std::map<std::pair<int, double>, Hypothesis> hyp_of;
    for (const auto& r : results) {
        const auto key = std::make_pair(static_cast<int>(r.hypothesis), r.kappa);
        tables[key].push_back(to_verdict_row(r));
        hyp_of[key] = r.hypothesis;
    }
    for (auto& [key, rows] : tables) {
        std::sort(rows.begin(), rows.end(),
                  [](const VerdictRow& a, const VerdictRow& b) {
                      return a.language < b.language;
                  });
        const std::string file = std::string("verdicts_") +
                                 to_string(hyp_of.at(key)) + "_kappa_" +
                                 format_double(key.second) + ".csv";
        write_verdict_table(dir / name / file, rows);
    }

    const auto raw = sweep_counts(results, false);
    const auto adjusted = sweep_counts(results, true);
    write_sweep_counts(dir / name / "sweep_counts.csv", raw);
    write_sweep_counts(dir / name / "sweep_counts_bh.csv", adjusted);
    summary[name]["decision_counts"] = counts_json(raw);
    summary[name]["decision_counts_bh"] = counts_json(adjusted);
}

}  // namespace

void emit_report(const std::filesystem::path& report_dir, const ReportInputs& in) {
    if (in.correlation_results.empty() && in.agreement_results.empty())
        throw InputError("emit_report: no hypothesis results; run the test stage first");
    // The report directory mirrors exactly the current inputs: rebuild it so
    // files from earlier parameter sets (e.g. dropped kappa values) cannot
    // linger.  Validation above runs first so a bad call wipes nothing.
    std::filesystem::remove_all(report_dir);
    std::filesystem::create_directories(report_dir);

    json summary;
    summary["languages"] = in.languages;
    summary["parameters"] = json::object();
    for (const auto& [key, value] : in.parameters) summary["parameters"][key] = value;

    emit_source(report_dir, "correlation", in.correlation_results, summary);
    emit_source(report_dir, "agreement", in.agreement_results, summary);

    if (!in.correlations.empty()) {
        std::map<std::string, std::map<std::string, double>> means;
        for (const auto& [language, obs] : in.correlations)
            means[language] = pair_type_means(obs);
        write_heatmap(report_dir / "heatmap.csv", means);
    }
    if (!in.agreements.empty()) {
        std::map<std::string, std::map<std::string, double>> means;
        for (const auto& [language, obs] : in.agreements)
            means[language] = pair_type_means(obs);
        write_heatmap(report_dir / "heatmap_agreement.csv", means);
    }

    if (!in.classification.empty()) {
        write_classification_metrics(report_dir / "classification_metrics.csv",
                                     in.classification);
        json arr = json::array();
        for (const auto& m : in.classification) {
            json jm;
            jm["language"] = m.language;
            jm["config_id"] = m.config_id;
            jm["pipeline_type"] = std::string(1, m.pipeline_type);
            jm["macro_f1"] = m.f1;
            jm["mcc"] = m.mcc;
            arr.push_back(jm);
        }
        summary["classification"] = arr;
    }

    summary["warnings"] = in.warnings;

    const std::filesystem::path summary_path = report_dir / "summary.json";
    std::ofstream out(summary_path, std::ios::trunc);
    if (!out) throw InputError("cannot write " + summary_path.string());
    out << summary.dump(2) << "\n";
    if (!out) throw InputError("short write to " + summary_path.string());
}

}  // namespace invlab

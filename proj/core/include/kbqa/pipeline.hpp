#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kbqa/kb_store.hpp"
#include "kbqa/retrieval.hpp"

namespace kbqa {

// The fixed instruction attached to every training record.
inline constexpr std::string_view kInstructionText =
    "Generate a Logical Form query that retrieves the information corresponding to the given "
    "question.";

struct DatasetRecord {
    std::string id;
    std::string question;
    std::string logical_form;          // gold grounded form, canonical text
    std::vector<std::string> answers;  // entity IDs / literal lexical forms
};

struct InstructionRecord {
    std::string instruction;
    std::string input;
    std::string output;
};

struct BeamCandidate {
    std::string text;
    std::optional<double> score;
};

struct CandidateBeam {
    std::string id;
    std::vector<BeamCandidate> candidates;  // generator beam order
};

struct Prediction {
    std::string id;
    std::vector<std::string> answers;  // sorted
    std::string sparql;
    std::string logical_form;  // grounded canonical text; empty when grounding failed

    // Metric support, not part of the serialized prediction: canonical prints
    // of the beam candidates (nullopt where a candidate failed to parse).
    std::vector<std::optional<std::string>> beam_canonical;
    std::size_t unparseable_candidates = 0;
};

// Gold record plus its canonical textual form (when every entity has a label).
struct GoldReference {
    DatasetRecord record;
    std::optional<std::string> textual_form;
};

struct Metrics {
    double f1 = 0.0;
    double hits_at_1 = 0.0;
    double acc = 0.0;
    std::optional<double> em;  // set only when textual gold forms are available
    std::optional<double> bm;
    std::optional<double> sm;
    std::size_t max_tokens = 0;
    std::size_t question_count = 0;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HttpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Instruction data
// ---------------------------------------------------------------------------

struct TrainingData {
    std::vector<InstructionRecord> records;
    std::vector<std::string> skipped_ids;  // records with unlabeled entities
    std::size_t max_tokens = 0;            // max whitespace tokens per record
};

std::size_t whitespace_token_count(std::string_view text);

// Textualizes each gold form against the KB labels. Records whose entities
// lack labels are skipped and reported, not fatal.
TrainingData build_training_data(std::span<const DatasetRecord> records, const KbStore& kb);

// ---------------------------------------------------------------------------
// Answering
// ---------------------------------------------------------------------------

// Parses the beam (skipping unparseable candidates), grounds it, and executes
// the first workable query. An unanswerable beam yields an empty Prediction.
Prediction answer(const CandidateBeam& beam, const KbStore& kb, const RetrievalConfig& config,
                  const ScorerSet& scorers);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::vector<GoldReference> make_gold_references(std::span<const DatasetRecord> records,
                                                const KbStore& kb);
std::vector<GoldReference> make_gold_references(
    std::span<const DatasetRecord> records,
    const std::unordered_map<std::string, std::string>& labels_by_id);

// Aligns predictions and golds by question ID (throws on a mismatch) and
// aggregates F1 / Hits@1 / Acc, plus EM / BM / SM and the max token count
// when every gold carries a textual form.
Metrics evaluate(std::span<const Prediction> predictions, std::span<const GoldReference> golds);

// ---------------------------------------------------------------------------
// Files and services
// ---------------------------------------------------------------------------

// JSON-lines readers/writers. Formats:
//   dataset:      {"id", "question", "logical_form", "answers": [...]}
//   beams:        {"id", "candidates": [{"text", "score"?}, ...]}
//   predictions:  {"id", "answers": [...], "sparql", "logical_form"}
//   instructions: {"instruction", "input", "output"}
std::vector<DatasetRecord> load_dataset(const std::string& path);
std::vector<CandidateBeam> ingest_candidates(const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path);
void write_instruction_data(std::span<const InstructionRecord> records, std::ostream& out);
void write_predictions(std::span<const Prediction> predictions, std::ostream& out);

// POST {"question", "beam_size"} to a generation service; expects
// {"candidates": [{"text", "score"?}, ...]}. Failures raise HttpError.
CandidateBeam fetch_candidates(const std::string& service_url, const std::string& question,
                               int beam_size);

// Reattaches beam texts to loaded predictions so EM/BM/SM can be computed
// from files. Beams are matched to predictions by ID.
void attach_beams(std::vector<Prediction>& predictions, std::span<const CandidateBeam> beams);

}  // namespace kbqa

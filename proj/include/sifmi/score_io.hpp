#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sifmi/influence.hpp"

namespace sifmi {

// One scores-CSV row: the record plus enough provenance to reproduce it.
struct ScoreRow {
    int sample_id = -1;
    double score = 0.0;
    int label_match = 0;
    int membership = -1;
    std::string scorer;
    int r = 1;
    int d = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
};

// Header: sample_id,score,label_match,membership,scorer,r,d,lambda,seed
void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows,
                      bool append = false);
void append_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows);

// Tolerates a truncated final line (interrupted writer); everything parsed
// before it is returned.
std::vector<ScoreRow> read_scores_csv(const std::string& path);

struct PredictionRow {
    int sample_id = -1;
    int prediction = 0;
    int ground_truth = 0;
};

void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::string& path);

}  // namespace sifmi

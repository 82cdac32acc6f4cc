#include "sifmi/score_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sifmi/common.hpp"

namespace sifmi {

namespace {

constexpr const char* kScoresHeader =
    "sample_id,score,label_match,membership,scorer,r,d,lambda,seed";

std::string format_row(const ScoreRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%d,%s,%d,%d,%.17g,%llu", r.sample_id, r.score,
                  r.label_match, r.membership, r.scorer.c_str(), r.r, r.d, r.lambda,
                  static_cast<unsigned long long>(r.seed));
    return buf;
}

bool parse_row(const std::string& line, ScoreRow& out) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) return false;
    try {
        out.sample_id = std::stoi(cells[0]);
        out.score = std::stod(cells[1]);
        out.label_match = std::stoi(cells[2]);
        out.membership = std::stoi(cells[3]);
        out.scorer = cells[4];
        out.r = std::stoi(cells[5]);
        out.d = std::stoi(cells[6]);
        out.lambda = std::stod(cells[7]);
        out.seed = std::stoull(cells[8]);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace

void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error("cannot write scores CSV '" + path + "'");
    if (!append) out << kScoresHeader << "\n";
    for (const ScoreRow& r : rows) out << format_row(r) << "\n";
    out.flush();
    if (!out) throw Error("failed writing scores CSV '" + path + "'");
}

void append_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows) {
    write_scores_csv(path, rows, true);
}

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scores CSV '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("scores CSV '" + path + "' is empty");
    if (line != kScoresHeader)
        throw FormatError("unexpected scores CSV header in '" + path + "'");
    std::vector<ScoreRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ScoreRow r;
        if (!parse_row(line, r)) {
            // A torn final line from an interrupted run is recoverable; a bad
            // row in the middle is not.
            if (in.peek() == EOF) break;
            throw FormatError("bad scores CSV row in '" + path + "': " + line);
        }
        rows.push_back(r);
    }
    return rows;
}

void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictions CSV '" + path + "'");
    out << "sample_id,prediction,ground_truth\n";
    for (const PredictionRow& r : rows)
        out << r.sample_id << "," << r.prediction << "," << r.ground_truth << "\n";
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open predictions CSV '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "sample_id,prediction,ground_truth")
        throw FormatError("unexpected predictions CSV header in '" + path + "'");
    std::vector<PredictionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
            throw FormatError("bad predictions CSV row in '" + path + "': " + line);
        rows.push_back({std::stoi(a), std::stoi(b), std::stoi(c)});
    }
    return rows;
}

}  // namespace sifmi

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "dudospect/harness/train.hpp"
#include "dudospect/metrics.hpp"

namespace dudospect::harness {

// Prediction surface used by evaluate(); the production implementation
// wraps a trained model, tests can substitute oracles.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::string label() const = 0;
    // Predicted full-dose 19-angle projection in raw (count) scale.
    virtual ProjectionTensor predict_projection(const DatasetCase& c) = 0;
    // Image-domain methods may return the volume directly; others leave
    // it empty and the harness reconstructs MLEM(predicted projection).
    virtual std::optional<VolumeTensor> predict_volume(const DatasetCase& c) { return std::nullopt; }
};

std::unique_ptr<Predictor> make_model_predictor(const std::string& checkpoint_base,
                                                const DatasetManifest& manifest);

struct EvaluationResult {
    MetricReport projection;           // prediction vs P_FD&19A
    MetricReport image;                // reconstruction vs I_FD&19A
    MetricReport baseline_projection;  // unprocessed P_LD&9A vs P_FD&19A
    MetricReport baseline_image;       // I_LD&9A vs I_FD&19A
};

// Runs the predictor over a split and writes metrics_{projection,image}
// and baseline_* CSV/JSON files plus a sample archive for report grids.
EvaluationResult evaluate(Predictor& predictor, const DatasetManifest& manifest,
                          const std::string& split, const std::string& out_dir);

EvaluationResult evaluate_checkpoint(const std::string& checkpoint_base,
                                     const DatasetManifest& manifest, const std::string& split,
                                     const std::string& out_dir);

}  // namespace dudospect::harness

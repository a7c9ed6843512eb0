#include "veinpad/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "veinpad/rng.hpp"

namespace veinpad {

void TrainConfig::validate() const {
    if (!(c > 0.0)) throw ContractError("TrainConfig: C must be positive");
    if (epochs < 1) throw ContractError("TrainConfig: epochs < 1");
    if (!(tol > 0.0)) throw ContractError("TrainConfig: tol must be positive");
}

namespace {

double scale_value(double x, double lo, double hi) {
    if (hi <= lo) return 0.0; // constant training dimension
    return std::clamp((x - lo) / (hi - lo), -0.5, 1.5);
}

} // namespace

LinearModel train(const std::vector<FeatureVector>& features,
                  const std::vector<PresentationLabel>& labels, const TrainConfig& config,
                  const TrainMeta& meta, TrainReport* report) {
    config.validate();
    if (features.size() != labels.size()) {
        throw ContractError("train: feature/label count mismatch");
    }
    const std::size_t l = features.size();
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& lab : labels) {
        (lab == PresentationLabel::BonaFide ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0) throw TrainingError("train: single-class input");
    if (n_pos < 2 || n_neg < 2) throw TrainingError("train: needs at least 2 samples per class");
    if (l > 4096) throw TrainingError("train: dense dual solver capped at 4096 samples");
    const std::size_t dim = features[0].bins.size();
    if (dim == 0) throw ContractError("train: empty features");
    for (const auto& f : features) {
        if (f.bins.size() != dim) throw ContractError("train: feature dimension mismatch");
    }

    LinearModel model;
    model.meta = meta;
    model.feature_min.assign(dim, 0.0);
    model.feature_max.assign(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
        double lo = features[0].bins[j], hi = features[0].bins[j];
        for (std::size_t i = 1; i < l; ++i) {
            lo = std::min(lo, features[i].bins[j]);
            hi = std::max(hi, features[i].bins[j]);
        }
        model.feature_min[j] = lo;
        model.feature_max[j] = hi;
    }

    std::vector<double> x(l * dim);
    std::vector<double> y(l);
    for (std::size_t i = 0; i < l; ++i) {
        y[i] = labels[i] == PresentationLabel::BonaFide ? 1.0 : -1.0;
        for (std::size_t j = 0; j < dim; ++j) {
            x[i * dim + j] =
                scale_value(features[i].bins[j], model.feature_min[j], model.feature_max[j]);
        }
    }

    const double C = config.c;
    std::vector<double> kernel(l * l);
    for (std::size_t i = 0; i < l; ++i) {
        for (std::size_t j = i; j < l; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += x[i * dim + d] * x[j * dim + d];
            kernel[i * l + j] = dot;
            kernel[j * l + i] = dot;
        }
    }

    std::vector<double> alpha(l, 0.0);
    // grad[i] = y_i * (w . x_i) - 1, the gradient of the dual in min form;
    // -y_i*grad[i] = y_i - w.x_i is both the violation value and, at the
    // optimum, a bias candidate.
    std::vector<double> grad(l, -1.0);
    std::vector<double> w(dim, 0.0);

    const auto in_up = [&](std::size_t i) {
        return y[i] > 0.0 ? alpha[i] < C : alpha[i] > 0.0;
    };
    const auto in_low = [&](std::size_t i) {
        return y[i] > 0.0 ? alpha[i] > 0.0 : alpha[i] < C;
    };
    const auto max_step = [&](std::size_t u, std::size_t v) {
        // a_u moves by +y_u*t, a_v by -y_v*t; both must stay in [0, C].
        const double room_u = y[u] > 0.0 ? C - alpha[u] : alpha[u];
        const double room_v = y[v] > 0.0 ? alpha[v] : C - alpha[v];
        return std::min(room_u, room_v);
    };

    const auto pair_update = [&](std::size_t u, std::size_t v) {
        double quad = kernel[u * l + u] + kernel[v * l + v] - 2.0 * kernel[u * l + v];
        if (quad < 1e-12) quad = 1e-12;
        const double viol = (-y[u] * grad[u]) - (-y[v] * grad[v]);
        double t = viol / quad;
        t = std::min(t, max_step(u, v));
        if (t <= 0.0) return false;
        alpha[u] += y[u] * t;
        alpha[v] -= y[v] * t;
        for (std::size_t m = 0; m < l; ++m) {
            grad[m] += y[m] * t * (kernel[m * l + u] - kernel[m * l + v]);
        }
        for (std::size_t d = 0; d < dim; ++d) {
            w[d] += t * (x[u * dim + d] - x[v * dim + d]);
        }
        return true;
    };

    TrainReport rep;
    const Rng rng_root(config.seed);
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);

    double violation = 0.0;
    int epoch = 0;
    for (; epoch < config.epochs; ++epoch) {
        Rng rng = rng_root.derive(static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);
        for (const std::size_t i : order) {
            // Pair i with the maximal-violation partner on the opposite side.
            double best_viol = 0.0;
            std::size_t u = i, v = i;
            if (in_up(i)) {
                std::size_t arg = l;
                double m_low = 1e300;
                for (std::size_t j = 0; j < l; ++j) {
                    if (in_low(j) && -y[j] * grad[j] < m_low) {
                        m_low = -y[j] * grad[j];
                        arg = j;
                    }
                }
                if (arg != l) {
                    const double viol = -y[i] * grad[i] - m_low;
                    if (viol > best_viol) {
                        best_viol = viol;
                        u = i;
                        v = arg;
                    }
                }
            }
            if (in_low(i)) {
                std::size_t arg = l;
                double m_up = -1e300;
                for (std::size_t j = 0; j < l; ++j) {
                    if (in_up(j) && -y[j] * grad[j] > m_up) {
                        m_up = -y[j] * grad[j];
                        arg = j;
                    }
                }
                if (arg != l) {
                    const double viol = m_up - (-y[i] * grad[i]);
                    if (viol > best_viol) {
                        best_viol = viol;
                        u = arg;
                        v = i;
                    }
                }
            }
            if (best_viol > config.tol) pair_update(u, v);
        }

        // Dual objective (max form) and stopping measure, once per epoch.
        double sum_alpha = 0.0, w2 = 0.0;
        for (double a : alpha) sum_alpha += a;
        for (double wd : w) w2 += wd * wd;
        rep.dual_objective.push_back(sum_alpha - 0.5 * w2);

        double m_up = -1e300, m_low = 1e300;
        for (std::size_t i = 0; i < l; ++i) {
            const double v = -y[i] * grad[i];
            if (in_up(i)) m_up = std::max(m_up, v);
            if (in_low(i)) m_low = std::min(m_low, v);
        }
        violation = m_up - m_low;
        if (violation < config.tol) {
            ++epoch;
            break;
        }
    }
    rep.epochs_run = epoch;
    rep.final_violation = violation;

    // Bias from free support vectors when any exist, otherwise the midpoint
    // of the KKT feasibility interval. -y_i*grad[i] = y_i - w.x_i.
    {
        double sum_b = 0.0;
        std::size_t n_free = 0;
        for (std::size_t i = 0; i < l; ++i) {
            if (alpha[i] > 1e-12 * C && alpha[i] < C * (1.0 - 1e-12)) {
                sum_b += -y[i] * grad[i];
                ++n_free;
            }
        }
        if (n_free > 0) {
            model.bias = sum_b / static_cast<double>(n_free);
        } else {
            double m_up = -1e300, m_low = 1e300;
            for (std::size_t i = 0; i < l; ++i) {
                const double v = -y[i] * grad[i];
                if (in_up(i)) m_up = std::max(m_up, v);
                if (in_low(i)) m_low = std::min(m_low, v);
            }
            model.bias = (m_up + m_low) / 2.0;
        }
    }
    model.weights = w;

    {
        double obj = 0.0;
        for (double wd : w) obj += wd * wd;
        obj *= 0.5;
        for (std::size_t i = 0; i < l; ++i) {
            double s = model.bias;
            for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[i * dim + d];
            obj += C * std::max(0.0, 1.0 - y[i] * s);
        }
        rep.primal_objective = obj;
    }

    // Training score range, for pre-fusion normalization at eval time.
    {
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < l; ++i) {
            double s = model.bias;
            for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[i * dim + d];
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        model.score_min = lo;
        model.score_max = hi;
    }

    if (report != nullptr) *report = rep;
    return model;
}

double score(const LinearModel& model, const FeatureVector& feature) {
    if (feature.bins.size() != model.weights.size()) {
        throw DimensionError("score: feature dimension mismatch");
    }
    double s = model.bias;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        s += model.weights[j] *
             scale_value(feature.bins[j], model.feature_min[j], model.feature_max[j]);
    }
    return s;
}

const char* descriptor_name(DescriptorKind kind) {
    switch (kind) {
    case DescriptorKind::LBP: return "lbp";
    case DescriptorKind::LPQ: return "lpq";
    case DescriptorKind::BSIF: return "bsif";
    }
    return "?";
}

const char* source_name(SourceKind kind) {
    switch (kind) {
    case SourceKind::Raw: return "raw";
    case SourceKind::NormalMap: return "normal";
    case SourceKind::DiffuseMap: return "diffuse";
    }
    return "?";
}

DescriptorKind descriptor_from_name(const std::string& name) {
    if (name == "lbp") return DescriptorKind::LBP;
    if (name == "lpq") return DescriptorKind::LPQ;
    if (name == "bsif") return DescriptorKind::BSIF;
    throw ParseError("unknown descriptor '" + name + "'");
}

SourceKind source_from_name(const std::string& name) {
    if (name == "raw") return SourceKind::Raw;
    if (name == "normal") return SourceKind::NormalMap;
    if (name == "diffuse") return SourceKind::DiffuseMap;
    throw ParseError("unknown source '" + name + "'");
}

namespace {

void write_row(std::ofstream& out, const std::vector<double>& v) {
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        out << buf << (i + 1 == v.size() ? "\n" : " ");
    }
}

} // namespace

void save_model(const LinearModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model " + path.string());
    out << "LINSVM " << model.weights.size() << " " << descriptor_name(model.meta.descriptor_kind)
        << " " << source_name(model.meta.source_kind) << " " << model.meta.illumination << "\n";
    write_row(out, model.feature_min);
    write_row(out, model.feature_max);
    write_row(out, model.weights);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", model.bias);
    out << buf << "\n";
    char lo[32], hi[32];
    std::snprintf(lo, sizeof(lo), "%.17g", model.score_min);
    std::snprintf(hi, sizeof(hi), "%.17g", model.score_max);
    out << lo << " " << hi << "\n";
    if (!out) throw IoError("failed writing model " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model " + path.string());
    std::string magic, desc, src;
    std::size_t dim = 0;
    int illum = 0;
    if (!(in >> magic >> dim >> desc >> src >> illum) || magic != "LINSVM") {
        throw ParseError("bad model header in " + path.string());
    }
    if (dim == 0 || illum < 1 || illum > 3) {
        throw ParseError("bad model metadata in " + path.string());
    }
    LinearModel m;
    m.meta.descriptor_kind = descriptor_from_name(desc);
    m.meta.source_kind = source_from_name(src);
    m.meta.illumination = illum;
    const auto read_row = [&](std::vector<double>& v) {
        v.resize(dim);
        for (double& d : v) {
            if (!(in >> d)) throw ParseError("truncated model " + path.string());
        }
    };
    read_row(m.feature_min);
    read_row(m.feature_max);
    read_row(m.weights);
    if (!(in >> m.bias >> m.score_min >> m.score_max)) {
        throw ParseError("truncated model " + path.string());
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (m.feature_min[j] > m.feature_max[j]) {
            throw ParseError("model scale corrupt in " + path.string());
        }
    }
    return m;
}

} // namespace veinpad

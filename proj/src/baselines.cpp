#include "evomd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "json.hpp"

#include "evomd/errors.hpp"
#include "evomd/jsonl.hpp"

namespace evomd {

using nlohmann::json;

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::freq: return "freq";
        case ModelKind::markov: return "markov";
        case ModelKind::semimarkov: return "semimarkov";
        case ModelKind::regressor: return "regressor";
    }
    throw ValidationError("unknown model kind");
}

ModelKind model_kind_from_name(std::string_view name) {
    if (name == "freq") return ModelKind::freq;
    if (name == "markov") return ModelKind::markov;
    if (name == "semimarkov") return ModelKind::semimarkov;
    if (name == "regressor") return ModelKind::regressor;
    throw ValidationError("unknown model kind \"" + std::string(name) +
                          "\" (expected freq, markov, semimarkov, or regressor)");
}

namespace {

using Token = std::pair<std::string, std::int64_t>;  // (species string, duration ps)

// Sample token stream in the model's internal orientation: backward models
// see time reversed, so "next" always means the thing being predicted.
std::vector<Token> sample_tokens(const PredictionSample& s) {
    std::vector<Token> tokens;
    if (s.task == Task::backward) {
        for (auto it = s.history.rbegin(); it != s.history.rend(); ++it)
            tokens.emplace_back(it->first.render(), it->second);
    } else {
        for (const auto& [f, d] : s.history) tokens.emplace_back(f.render(), d);
    }
    for (const auto& [f, d] : s.targets) tokens.emplace_back(f.render(), d);
    return tokens;
}

std::string token_label(const BaselineModel& model, const Token& t) {
    if (model.kind == ModelKind::semimarkov)
        return t.first + "|" + bin_label(model.bins, duration_bin(model.bins, t.second));
    return t.first;
}

// Context key: the labels of the last `len` tokens before position `pos`,
// joined oldest-first with '>'.
std::string context_key(const BaselineModel& model, const std::vector<Token>& tokens, std::size_t pos,
                        int len) {
    std::string key;
    for (std::size_t k = pos - static_cast<std::size_t>(len); k < pos; ++k) {
        if (!key.empty()) key += '>';
        key += token_label(model, tokens[k]);
    }
    return key;
}

std::vector<Token> history_tokens(const BaselineModel& model, const HistoryPairs& history) {
    std::vector<Token> tokens;
    if (model.backward_direction) {
        for (auto it = history.rbegin(); it != history.rend(); ++it)
            tokens.emplace_back(it->first.render(), it->second);
    } else {
        for (const auto& [f, d] : history) tokens.emplace_back(f.render(), d);
    }
    return tokens;
}

Eigen::VectorXd feature_vector(const BaselineModel& model, const std::vector<Token>& tokens) {
    const auto u = static_cast<std::int64_t>(model.universe.size());
    const std::int64_t dim = static_cast<std::int64_t>(model.feature_slots) * u + 1;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    // last feature_slots tokens, left-padded with zero blocks
    const std::size_t take = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(model.feature_slots));
    for (std::size_t k = 0; k < take; ++k) {
        const auto& tok = tokens[tokens.size() - take + k];
        const auto counts = composition_vector(parse_formula(tok.first, FormulaMode::strict), model.universe);
        const std::int64_t slot = static_cast<std::int64_t>(model.feature_slots - take + k);
        for (std::int64_t e = 0; e < u; ++e)
            x[slot * u + e] = static_cast<double>(counts[static_cast<std::size_t>(e)]);
    }
    x[dim - 1] = 1.0;  // bias
    return x;
}

void fit_regressor(BaselineModel& model, const std::vector<PredictionSample>& train) {
    const auto u = static_cast<std::int64_t>(model.universe.size());
    const std::int64_t dim = static_cast<std::int64_t>(model.feature_slots) * u + 1;
    const auto n = static_cast<std::int64_t>(train.size());

    Eigen::MatrixXd x(n, dim);
    Eigen::MatrixXd y(n, u);
    for (std::int64_t r = 0; r < n; ++r) {
        auto tokens = sample_tokens(train[static_cast<std::size_t>(r)]);
        const auto& target = tokens.back();  // first/only target is the regression target
        std::vector<Token> hist(tokens.begin(),
                                tokens.end() - static_cast<std::int64_t>(train[static_cast<std::size_t>(r)].targets.size()));
        x.row(r) = feature_vector(model, hist).transpose();
        const auto counts = composition_vector(parse_formula(target.first, FormulaMode::strict), model.universe);
        for (std::int64_t e = 0; e < u; ++e)
            y(r, e) = static_cast<double>(counts[static_cast<std::size_t>(e)]);
    }

    Eigen::MatrixXd normal = x.transpose() * x;
    normal.diagonal().array() += model.lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
        throw ValidationError("normal matrix is singular; refit with lambda > 0");
    Eigen::MatrixXd w = llt.solve(x.transpose() * y);

    model.weights.assign(static_cast<std::size_t>(dim), std::vector<double>(static_cast<std::size_t>(u)));
    for (std::int64_t r = 0; r < dim; ++r)
        for (std::int64_t c = 0; c < u; ++c)
            model.weights[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = w(r, c);
}

std::vector<double> regressor_output(const BaselineModel& model, const std::vector<Token>& tokens) {
    const auto u = model.universe.size();
    const auto x = feature_vector(model, tokens);
    std::vector<double> y(u, 0.0);
    for (std::size_t e = 0; e < u; ++e) {
        double acc = 0.0;
        for (std::int64_t d = 0; d < x.size(); ++d)
            acc += x[d] * model.weights[static_cast<std::size_t>(d)][e];
        y[e] = acc;
    }
    return y;
}

// Regressor candidates ranked by composition distance, ties toward the
// lexicographically smaller formula (= vocabulary order, since it is sorted).
std::vector<std::string> regressor_ranking(const BaselineModel& model, const std::vector<Token>& tokens) {
    const auto y = regressor_output(model, tokens);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& f : model.vocabulary) {
        const auto counts = composition_vector(parse_formula(f, FormulaMode::strict), model.universe);
        double dist = 0.0;
        for (std::size_t e = 0; e < y.size(); ++e) {
            const double diff = y[e] - static_cast<double>(counts[e]);
            dist += diff * diff;
        }
        scored.emplace_back(dist, f);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (auto& [dist, f] : scored) out.push_back(std::move(f));
    return out;
}

}  // namespace

BaselineModel fit(ModelKind kind, const std::vector<PredictionSample>& train,
                  const BaselineHyperparams& hp) {
    if (train.empty()) throw ValidationError("fit: empty train set");
    if (hp.alpha <= 0.0) throw ValidationError("fit: smoothing alpha must be positive");
    if (hp.order < 1 && (kind == ModelKind::markov || kind == ModelKind::semimarkov))
        throw ValidationError("fit: order must be >= 1");
    validate_bins(hp.bins);

    BaselineModel model;
    model.kind = kind;
    model.order = kind == ModelKind::freq ? 0 : hp.order;
    model.alpha = hp.alpha;
    model.lambda = hp.lambda;
    model.bins = hp.bins;

    bool any_backward = false, any_forward = false;
    for (const auto& s : train) (s.task == Task::backward ? any_backward : any_forward) = true;
    if (any_backward && any_forward)
        throw ValidationError("fit: backward samples cannot be mixed with forward samples");
    model.backward_direction = any_backward;

    std::set<std::string> vocab, elements;
    std::size_t max_history = 1;
    for (const auto& s : train) {
        max_history = std::max(max_history, s.history.size());
        for (const auto& tok : sample_tokens(s)) {
            vocab.insert(tok.first);
            auto& hist = model.duration_hist[tok.first];
            ++hist[tok.second];
            ++model.unigram[tok.first];
        }
    }
    model.vocabulary.assign(vocab.begin(), vocab.end());
    for (const auto& f : model.vocabulary)
        for (const auto& e : formula_elements(parse_formula(f, FormulaMode::strict))) elements.insert(e);
    model.universe.assign(elements.begin(), elements.end());
    model.feature_slots = static_cast<int>(max_history);

    if (kind == ModelKind::regressor) {
        fit_regressor(model, train);
        return model;
    }

    // Contexts at every order 1..order, so prediction can back off.
    for (const auto& s : train) {
        const auto tokens = sample_tokens(s);
        for (std::size_t pos = 1; pos < tokens.size(); ++pos)
            for (int len = 1; len <= model.order && static_cast<std::size_t>(len) <= pos; ++len)
                ++model.counts[context_key(model, tokens, pos, len)][tokens[pos].first];
    }
    return model;
}

std::vector<double> next_distribution(const BaselineModel& model, const HistoryPairs& history) {
    if (model.kind == ModelKind::regressor)
        throw ValidationError("regressor models have no probability distribution");
    if (model.vocabulary.empty()) throw ValidationError("model is not fitted");

    const auto tokens = history_tokens(model, history);
    const double v = static_cast<double>(model.vocabulary.size());

    // longest seen context wins; unigram is the terminal fallback
    const std::map<std::string, std::int64_t>* chosen = nullptr;
    for (int len = std::min<int>(model.order, static_cast<int>(tokens.size())); len >= 1; --len) {
        auto it = model.counts.find(context_key(model, tokens, tokens.size(), len));
        if (it != model.counts.end()) {
            chosen = &it->second;
            break;
        }
    }
    if (!chosen) chosen = &model.unigram;

    std::int64_t total = 0;
    for (const auto& [f, n] : *chosen) total += n;

    std::vector<double> probs(model.vocabulary.size());
    const double denom = static_cast<double>(total) + model.alpha * v;
    for (std::size_t k = 0; k < model.vocabulary.size(); ++k) {
        auto it = chosen->find(model.vocabulary[k]);
        const double count = it == chosen->end() ? 0.0 : static_cast<double>(it->second);
        probs[k] = (count + model.alpha) / denom;
    }
    return probs;
}

std::int64_t median_duration(const BaselineModel& model, const std::string& species) {
    auto it = model.duration_hist.find(species);
    if (it == model.duration_hist.end() || it->second.empty())
        throw ValidationError("no duration statistics for species " + species);
    std::int64_t total = 0;
    for (const auto& [d, n] : it->second) total += n;
    // median of the expanded histogram; even counts average the two middles
    const std::int64_t lo_rank = (total - 1) / 2, hi_rank = total / 2;
    std::int64_t lo = -1, hi = -1, seen = 0;
    for (const auto& [d, n] : it->second) {
        if (lo < 0 && seen + n > lo_rank) lo = d;
        if (seen + n > hi_rank) {
            hi = d;
            break;
        }
        seen += n;
    }
    return std::llround(0.5 * static_cast<double>(lo + hi));
}

std::vector<Prediction> predict_topk(const BaselineModel& model, const HistoryPairs& history, int k) {
    if (k < 1) throw ValidationError("k must be positive");
    if (history.empty()) throw ValidationError("empty history");

    std::vector<std::string> ranked;
    if (model.kind == ModelKind::regressor) {
        ranked = regressor_ranking(model, history_tokens(model, history));
    } else {
        const auto probs = next_distribution(model, history);
        std::vector<std::size_t> order(probs.size());
        std::iota(order.begin(), order.end(), 0);
        // stable sort keeps vocabulary order on ties
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
        for (auto idx : order) ranked.push_back(model.vocabulary[idx]);
    }

    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < take; ++i)
        out.emplace_back(ranked[i], median_duration(model, ranked[i]));
    return out;
}

Prediction predict_backward(const BaselineModel& model, const HistoryPairs& future_window) {
    if (!model.backward_direction)
        throw ValidationError("predict_backward needs a model fitted on backward samples");
    if (future_window.empty()) throw ValidationError("empty window");
    return predict_topk(model, future_window, 1).front();
}

std::vector<Prediction> rollout_nstep(const BaselineModel& model, const HistoryPairs& history, int n) {
    if (n < 1) throw ValidationError("rollout steps must be positive");
    HistoryPairs context = history;
    std::vector<Prediction> out;
    for (int step = 0; step < n; ++step) {
        auto pred = predict_topk(model, context, 1).front();
        // the context grows at the model's own "next" end
        const auto formula = parse_formula(pred.first, FormulaMode::strict);
        if (model.backward_direction)
            context.insert(context.begin(), {formula, pred.second});
        else
            context.emplace_back(formula, pred.second);
        out.push_back(std::move(pred));
    }
    return out;
}

json model_to_json(const BaselineModel& model) {
    json j;
    j["format_version"] = 1;
    j["kind"] = std::string(model_kind_name(model.kind));
    j["direction"] = model.backward_direction ? "backward" : "forward";
    j["order"] = model.order;
    j["alpha"] = model.alpha;
    j["lambda"] = model.lambda;
    j["bin_edges"] = model.bins.edges;
    j["feature_slots"] = model.feature_slots;
    j["vocabulary"] = model.vocabulary;
    j["universe"] = model.universe;

    json counts = json::object();
    for (const auto& [ctx, next] : model.counts) {
        json inner = json::object();
        for (const auto& [f, n] : next) inner[f] = n;
        counts[ctx] = std::move(inner);
    }
    j["counts"] = std::move(counts);

    json unigram = json::object();
    for (const auto& [f, n] : model.unigram) unigram[f] = n;
    j["unigram"] = std::move(unigram);

    json durations = json::object();
    for (const auto& [f, hist] : model.duration_hist) {
        json inner = json::object();
        for (const auto& [d, n] : hist) inner[std::to_string(d)] = n;
        durations[f] = std::move(inner);
    }
    j["durations"] = std::move(durations);

    if (!model.weights.empty()) j["weights"] = model.weights;
    return j;
}

void save_model(const std::filesystem::path& path, const BaselineModel& model) {
    auto out = open_output(path);
    out << model_to_json(model).dump(2) << '\n';
}

json predict_record(const BaselineModel& model, const DatasetRecord& record, int k) {
    const Task task = task_from_name(record.task);
    if (model.backward_direction != (task == Task::backward))
        throw ValidationError(std::string("model direction (") +
                              (model.backward_direction ? "backward" : "forward") + ") does not fit task " +
                              record.task);

    HistoryPairs history;
    for (const auto& [f, d] : record.history)
        history.emplace_back(parse_formula(f, FormulaMode::lenient), d);

    auto tuple_text = [](const Prediction& p) {
        return "(" + p.first + ", " + std::to_string(p.second) + ")";
    };

    json row{{"sample_id", record.sample_id}};
    if (task == Task::potential_k) {
        json candidates = json::array();
        for (const auto& p : predict_topk(model, history, k)) candidates.push_back(tuple_text(p));
        row["candidates"] = std::move(candidates);
    } else if (task == Task::backward) {
        row["output"] = tuple_text(predict_backward(model, history));
    } else {
        std::string text;
        for (const auto& p : rollout_nstep(model, history, target_count(task))) {
            if (!text.empty()) text += "; ";
            text += tuple_text(p);
        }
        row["output"] = text;
    }
    return row;
}

BaselineModel model_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || j.value("format_version", 0) != 1)
        throw ValidationError(where + ": unsupported model file (expected format_version 1)");

    try {
        BaselineModel model;
        model.kind = model_kind_from_name(j.at("kind").get<std::string>());
        model.backward_direction = j.value("direction", "forward") == std::string("backward");
        model.order = j.at("order").get<int>();
        model.alpha = j.at("alpha").get<double>();
        model.lambda = j.at("lambda").get<double>();
        model.bins.edges = j.at("bin_edges").get<std::vector<std::int64_t>>();
        model.feature_slots = j.at("feature_slots").get<int>();
        model.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        model.universe = j.at("universe").get<std::vector<std::string>>();

        for (const auto& [ctx, next] : j.at("counts").items())
            for (const auto& [f, n] : next.items()) model.counts[ctx][f] = n.get<std::int64_t>();
        for (const auto& [f, n] : j.at("unigram").items()) model.unigram[f] = n.get<std::int64_t>();
        for (const auto& [f, hist] : j.at("durations").items())
            for (const auto& [d, n] : hist.items())
                model.duration_hist[f][std::stoll(d)] = n.get<std::int64_t>();
        if (j.contains("weights")) model.weights = j["weights"].get<std::vector<std::vector<double>>>();
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(where + ": malformed model: " + e.what());
    }
}

BaselineModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return model_from_json(j, path.string());
}

}  // namespace evomd

#include "varpost/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "varpost/error.hpp"
#include "varpost/variational.hpp"

namespace varpost {

using nlohmann::json;

namespace {

constexpr double kAssumptionSlack = 1e-12;

const std::set<std::string> kTopLevelKeys = {
    "experiment", "seed",    "replicates", "probes", "certify_depth", "radius",  "t_values", "m_values", "grid",
    "family",     "loss",    "losses",     "observed", "entropy",     "hypermix", "langevin", "output"};

std::string key_path(const std::string& parent, std::string_view key) {
    return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

std::string index_path(const std::string& parent, std::size_t i) { return parent + "[" + std::to_string(i) + "]"; }

struct AffineFamily {
    FiniteRangePotential base;
    FiniteRangePotential direction;
};

class Parser {
public:
    explicit Parser(std::size_t certify_depth) : certify_depth_(certify_depth) {}

    std::vector<Diagnostic> diagnostics;
    std::optional<AffineFamily> affine;

    void fail(const std::string& path, std::string message) { diagnostics.push_back({path, std::move(message)}); }

    template <class F>
    auto guarded(const std::string& path, F&& f) -> std::optional<decltype(f())> {
        try {
            return f();
        } catch (const Error& e) {
            fail(path, e.what());
        } catch (const json::exception& e) {
            fail(path, e.what());
        }
        return std::nullopt;
    }

    const json* member(const json& obj, const std::string& path, std::string_view key, bool required) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(key_path(path, key), "required field is missing");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json& j, const std::string& path) {
        if (!j.is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(path, "expected a finite number");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> unsigned_integer(const json& j, const std::string& path) {
        if (j.is_number_unsigned()) return j.get<std::uint64_t>();
        if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
        fail(path, "expected a nonnegative integer");
        return std::nullopt;
    }

    std::optional<std::vector<double>> numbers(const json& j, const std::string& path) {
        if (j.is_number()) {
            auto v = number(j, path);
            if (!v) return std::nullopt;
            return std::vector<double>{*v};
        }
        if (!j.is_array() || j.empty()) {
            fail(path, "expected a nonempty array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto v = number(j[i], index_path(path, i));
            if (!v) return std::nullopt;
            out.push_back(*v);
        }
        return out;
    }

    std::optional<std::vector<std::size_t>> increasing_counts(const json& j, const std::string& path,
                                                              std::size_t minimum) {
        if (!j.is_array() || j.empty()) {
            fail(path, "expected a nonempty array of integers");
            return std::nullopt;
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto v = unsigned_integer(j[i], index_path(path, i));
            if (!v) return std::nullopt;
            if (*v < minimum) {
                fail(index_path(path, i), "must be at least " + std::to_string(minimum));
                return std::nullopt;
            }
            if (!out.empty() && *v <= out.back()) {
                fail(index_path(path, i), "values must be strictly increasing");
                return std::nullopt;
            }
            out.push_back(*v);
        }
        return out;
    }

    std::optional<Alphabet> alphabet(const json& j, const std::string& path) {
        if (j.is_number_integer()) {
            auto n = unsigned_integer(j, path);
            if (!n) return std::nullopt;
            return guarded(path, [&] { return Alphabet::numeric(*n); });
        }
        if (!j.is_array()) {
            fail(path, "expected a symbol count or an array of symbol names");
            return std::nullopt;
        }
        std::vector<std::string> symbols;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_string()) {
                fail(index_path(path, i), "expected a string");
                return std::nullopt;
            }
            symbols.push_back(j[i].get<std::string>());
        }
        return guarded(path, [&] { return Alphabet(std::move(symbols)); });
    }

    // Table over the words of one length, given either as an array in code
    // order or as an object keyed by words. Entries are numbers (width 0) or
    // arrays of `width` numbers; the result is flattened row by row.
    std::optional<std::vector<double>> word_table(const json& j, const std::string& path, const Alphabet& a,
                                                  std::size_t length, std::size_t width) {
        auto rows = guarded(path, [&] { return checked_power(a.size(), length); });
        if (!rows) return std::nullopt;
        const std::size_t cols = std::max<std::size_t>(width, 1);
        std::vector<double> out(*rows * cols);
        auto read_entry = [&](const json& e, const std::string& p, std::size_t row) {
            if (width == 0) {
                auto v = number(e, p);
                if (!v) return false;
                out[row] = *v;
                return true;
            }
            if (!e.is_array() || e.size() != width) {
                fail(p, "expected an array of " + std::to_string(width) + " numbers");
                return false;
            }
            for (std::size_t c = 0; c < width; ++c) {
                auto v = number(e[c], index_path(p, c));
                if (!v) return false;
                out[row * width + c] = *v;
            }
            return true;
        };
        if (j.is_array()) {
            if (j.size() != *rows) {
                fail(path, "expected " + std::to_string(*rows) + " entries, got " + std::to_string(j.size()));
                return std::nullopt;
            }
            for (std::size_t i = 0; i < *rows; ++i)
                if (!read_entry(j[i], index_path(path, i), i)) return std::nullopt;
            return out;
        }
        if (!j.is_object()) {
            fail(path, "expected an array or an object keyed by words");
            return std::nullopt;
        }
        std::vector<bool> seen(*rows, false);
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string p = key_path(path, it.key());
            auto word = guarded(p, [&] { return a.parse_word(it.key()); });
            if (!word) return std::nullopt;
            if (word->size() != length) {
                fail(p, "word has length " + std::to_string(word->size()) + ", expected " + std::to_string(length));
                return std::nullopt;
            }
            const std::size_t code = encode_word(*word, a.size());
            seen[code] = true;
            if (!read_entry(*it, p, code)) return std::nullopt;
        }
        for (std::size_t code = 0; code < *rows; ++code) {
            if (!seen[code]) {
                const Word w = decode_word(code, length, a.size());
                fail(path, "missing word '" + a.format_word(w) + "'");
                return std::nullopt;
            }
        }
        return out;
    }

    std::optional<FiniteRangePotential> potential(const json& j, const std::string& path, const Alphabet& a) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return std::nullopt;
        }
        if (j.contains("equal_neighbour")) {
            auto beta = number(j["equal_neighbour"], key_path(path, "equal_neighbour"));
            if (!beta) return std::nullopt;
            return guarded(path, [&] { return equal_neighbour_potential(a.size(), *beta); });
        }
        const json* range = member(j, path, "range", true);
        const json* table = member(j, path, "table", true);
        if (!range || !table) return std::nullopt;
        auto r = unsigned_integer(*range, key_path(path, "range"));
        if (!r) return std::nullopt;
        if (*r == 0) {
            fail(key_path(path, "range"), "range must be at least 1");
            return std::nullopt;
        }
        auto values = word_table(*table, key_path(path, "table"), a, *r, 0);
        if (!values) return std::nullopt;
        return guarded(key_path(path, "table"),
                       [&] { return FiniteRangePotential::create(a.size(), *r, std::move(*values)); });
    }

    std::optional<GibbsModel> gibbs_model(const Alphabet& a, const FiniteRangePotential& phi, const std::string& path) {
        return guarded(path, [&] { return make_gibbs_model(a, phi, certify_depth_); });
    }

    struct Model {
        MarkovMeasure markov;
        std::optional<GibbsModel> gibbs;
    };

    std::optional<Model> model(const json& j, const std::string& path) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return std::nullopt;
        }
        std::string kind = "markov";
        if (j.contains("kind")) {
            if (!j["kind"].is_string()) {
                fail(key_path(path, "kind"), "expected \"markov\" or \"gibbs\"");
                return std::nullopt;
            }
            kind = j["kind"].get<std::string>();
        }
        const json* aj = member(j, path, "alphabet", true);
        if (!aj) return std::nullopt;
        auto a = alphabet(*aj, key_path(path, "alphabet"));
        if (!a) return std::nullopt;
        if (kind == "gibbs") {
            const json* pj = member(j, path, "potential", true);
            if (!pj) return std::nullopt;
            auto phi = potential(*pj, key_path(path, "potential"), *a);
            if (!phi) return std::nullopt;
            auto g = gibbs_model(*a, *phi, key_path(path, "potential"));
            if (!g) return std::nullopt;
            return Model{g->markov, *g};
        }
        if (kind != "markov") {
            fail(key_path(path, "kind"), "unknown model kind '" + kind + "'");
            return std::nullopt;
        }
        std::size_t order = 1;
        if (j.contains("order")) {
            auto k = unsigned_integer(j["order"], key_path(path, "order"));
            if (!k) return std::nullopt;
            order = *k;
        }
        const json* kj = member(j, path, "kernel", true);
        if (!kj) return std::nullopt;
        auto kernel = word_table(*kj, key_path(path, "kernel"), *a, order, a->size());
        if (!kernel) return std::nullopt;
        if (j.contains("stationary")) {
            auto st = word_table(j["stationary"], key_path(path, "stationary"), *a, order, 0);
            if (!st) return std::nullopt;
            auto m = guarded(key_path(path, "stationary"), [&] {
                return MarkovMeasure::create(*a, order, *kernel, BlockMeasure::create(a->size(), order, *st));
            });
            if (!m) return std::nullopt;
            return Model{*m, std::nullopt};
        }
        auto m = guarded(key_path(path, "kernel"), [&] { return MarkovMeasure::from_kernel(*a, order, *kernel); });
        if (!m) return std::nullopt;
        return Model{*m, std::nullopt};
    }

private:
    std::size_t certify_depth_;
};

std::optional<ThetaGrid> parse_grid(Parser& p, const json& j) {
    const std::string path = "grid";
    std::vector<double> points;
    if (j.contains("points")) {
        auto v = p.numbers(j["points"], "grid.points");
        if (!v) return std::nullopt;
        points = *v;
    } else if (j.contains("linspace")) {
        const json& l = j["linspace"];
        const json* lo = p.member(l, "grid.linspace", "lo", true);
        const json* hi = p.member(l, "grid.linspace", "hi", true);
        const json* n = p.member(l, "grid.linspace", "n", true);
        if (!lo || !hi || !n) return std::nullopt;
        auto a = p.number(*lo, "grid.linspace.lo");
        auto b = p.number(*hi, "grid.linspace.hi");
        auto c = p.unsigned_integer(*n, "grid.linspace.n");
        if (!a || !b || !c) return std::nullopt;
        auto g = p.guarded("grid.linspace", [&] { return ThetaGrid::linspace(*a, *b, *c); });
        if (!g) return std::nullopt;
        points.assign(g->points().begin(), g->points().end());
    } else {
        p.fail(path, "expected 'points' or 'linspace'");
        return std::nullopt;
    }
    auto uniform = p.guarded("grid.points", [&] { return ThetaGrid::uniform(points); });
    if (!uniform) return std::nullopt;
    if (!j.contains("prior")) return uniform;
    auto prior = p.numbers(j["prior"], "grid.prior");
    if (!prior) return std::nullopt;
    return p.guarded("grid.prior", [&] { return ThetaGrid::create(points, *prior); });
}

bool parse_family(Parser& p, const json& j, const ThetaGrid& grid, Experiment& ex) {
    const std::string path = "family";
    if (!j.is_object()) {
        p.fail(path, "expected an object");
        return false;
    }
    const std::string kind = j.value("kind", std::string("gibbs"));
    if (kind == "markov") {
        const json* models = p.member(j, path, "models", true);
        if (!models) return false;
        if (!models->is_array() || models->size() != grid.size()) {
            p.fail("family.models", "expected one model per grid point (" + std::to_string(grid.size()) + ")");
            return false;
        }
        bool all_gibbs = true;
        std::vector<GibbsModel> gibbs;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const std::string mp = index_path("family.models", i);
            auto m = p.model((*models)[i], mp);
            if (!m) return false;
            if (ex.model_alphabet && !(m->markov.alphabet() == *ex.model_alphabet)) {
                p.fail(key_path(mp, "alphabet"), "all family members must share one alphabet");
                return false;
            }
            ex.model_alphabet = m->markov.alphabet();
            ex.family.push_back(m->markov);
            if (m->gibbs) gibbs.push_back(*m->gibbs);
            else all_gibbs = false;
        }
        if (all_gibbs) ex.gibbs_family = std::move(gibbs);
        return true;
    }
    if (kind != "gibbs") {
        p.fail("family.kind", "expected \"gibbs\" or \"markov\"");
        return false;
    }
    const json* aj = p.member(j, path, "alphabet", true);
    if (!aj) return false;
    auto a = p.alphabet(*aj, "family.alphabet");
    if (!a) return false;
    ex.model_alphabet = *a;
    std::vector<FiniteRangePotential> potentials;
    if (j.contains("potentials")) {
        const json& list = j["potentials"];
        if (!list.is_array() || list.size() != grid.size()) {
            p.fail("family.potentials", "expected one potential per grid point (" + std::to_string(grid.size()) + ")");
            return false;
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            auto phi = p.potential(list[i], index_path("family.potentials", i), *a);
            if (!phi) return false;
            potentials.push_back(*phi);
        }
    } else {
        const json* dj = p.member(j, path, "direction", true);
        if (!dj) return false;
        auto direction = p.potential(*dj, "family.direction", *a);
        if (!direction) return false;
        FiniteRangePotential base = FiniteRangePotential::zero(a->size(), direction->range());
        if (j.contains("base")) {
            auto b = p.potential(j["base"], "family.base", *a);
            if (!b) return false;
            if (b->range() != direction->range()) {
                p.fail("family.base", "base and direction must have the same range");
                return false;
            }
            base = *b;
        }
        p.affine = AffineFamily{base, *direction};
        for (std::size_t i = 0; i < grid.size(); ++i)
            potentials.push_back(FiniteRangePotential::affine(base, grid[i], *direction));
    }
    for (std::size_t i = 0; i < potentials.size(); ++i) {
        auto g = p.gibbs_model(*a, potentials[i], index_path(path, i));
        if (!g) return false;
        ex.family.push_back(g->markov);
        ex.gibbs_family.push_back(std::move(*g));
    }
    return true;
}

std::optional<ObservedSystemSpec> parse_observed(Parser& p, const json& j, std::size_t certify_depth,
                                                 const std::optional<Alphabet>& model_alphabet) {
    const std::string path = "observed";
    const json* sj = p.member(j, path, "source", true);
    if (!sj) return std::nullopt;
    std::optional<MarkovMeasure> source;
    if (sj->is_object() && sj->value("kind", std::string()) == "family") {
        if (!p.affine || !model_alphabet) {
            if (model_alphabet || p.diagnostics.empty()) p.fail("observed.source", "a family source needs a Gibbs family given by base and direction");
            return std::nullopt;
        }
        const json* tj = p.member(*sj, "observed.source", "theta", true);
        if (!tj) return std::nullopt;
        auto theta = p.number(*tj, "observed.source.theta");
        if (!theta) return std::nullopt;
        auto phi = FiniteRangePotential::affine(p.affine->base, *theta, p.affine->direction);
        auto g = p.guarded("observed.source", [&] { return make_gibbs_model(*model_alphabet, phi, certify_depth); });
        if (!g) return std::nullopt;
        source = g->markov;
    } else {
        auto m = p.model(*sj, "observed.source");
        if (!m) return std::nullopt;
        source = m->markov;
    }
    ObservedSystemSpec spec{*source, std::nullopt, std::nullopt};
    if (j.contains("channel")) {
        const json& cj = j["channel"];
        const std::size_t n = source->alphabet_size();
        std::optional<Alphabet> out_alphabet;
        if (j.contains("observation_alphabet")) {
            out_alphabet = p.alphabet(j["observation_alphabet"], "observed.observation_alphabet");
            if (!out_alphabet) return std::nullopt;
        } else {
            out_alphabet = source->alphabet();
        }
        if (!cj.is_array() || cj.size() != n) {
            p.fail("observed.channel", "expected one row per source symbol (" + std::to_string(n) + ")");
            return std::nullopt;
        }
        std::vector<double> channel;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string rp = index_path("observed.channel", i);
            if (!cj[i].is_array() || cj[i].size() != out_alphabet->size()) {
                p.fail(rp, "expected " + std::to_string(out_alphabet->size()) + " probabilities");
                return std::nullopt;
            }
            auto row = p.numbers(cj[i], rp);
            if (!row) return std::nullopt;
            channel.insert(channel.end(), row->begin(), row->end());
        }
        spec.channel = std::move(channel);
        spec.observation_alphabet = *out_alphabet;
    } else if (j.contains("observation_alphabet")) {
        p.fail("observed.observation_alphabet", "an observation alphabet is only meaningful with a channel");
        return std::nullopt;
    }
    if (!p.guarded("observed.channel", [&] {
            spec.validate();
            return true;
        }))
        return std::nullopt;
    return spec;
}

struct ParsedLoss {
    LossSpec loss;
    std::optional<double> lipschitz;
};

std::optional<ParsedLoss> parse_loss(Parser& p, const json& j, const std::string& path, const Alphabet& xa,
                                     const Alphabet& ya) {
    if (!j.is_object()) {
        p.fail(path, "expected an object");
        return std::nullopt;
    }
    const std::string kind = j.value("kind", std::string("table"));
    std::optional<LossSpec> loss;
    if (kind == "hamming") {
        if (xa.size() != ya.size()) {
            p.fail(key_path(path, "kind"), "Hamming loss needs equal model and observation alphabet sizes");
            return std::nullopt;
        }
        loss = p.guarded(path, [&] { return LossSpec::hamming(xa.size()); });
    } else if (kind == "constant" || kind == "table") {
        std::size_t range = 1;
        if (j.contains("range")) {
            auto r = p.unsigned_integer(j["range"], key_path(path, "range"));
            if (!r) return std::nullopt;
            if (*r == 0) {
                p.fail(key_path(path, "range"), "range must be at least 1");
                return std::nullopt;
            }
            range = *r;
        }
        if (kind == "constant") {
            const json* vj = p.member(j, path, "value", true);
            if (!vj) return std::nullopt;
            auto v = p.number(*vj, key_path(path, "value"));
            if (!v) return std::nullopt;
            loss = p.guarded(path, [&] { return LossSpec::constant(xa.size(), ya.size(), range, *v); });
        } else {
            const json* tj = p.member(j, path, "table", true);
            if (!tj) return std::nullopt;
            auto y_words = p.guarded(key_path(path, "table"), [&] { return checked_power(ya.size(), range); });
            if (!y_words) return std::nullopt;
            auto table = p.word_table(*tj, key_path(path, "table"), xa, range, *y_words);
            if (!table) return std::nullopt;
            loss = p.guarded(key_path(path, "table"),
                             [&] { return LossSpec::create(xa.size(), ya.size(), range, std::move(*table)); });
        }
    } else {
        p.fail(key_path(path, "kind"), "expected \"hamming\", \"constant\" or \"table\"");
        return std::nullopt;
    }
    if (!loss) return std::nullopt;
    ParsedLoss out{*loss, std::nullopt};
    if (j.contains("lipschitz")) {
        auto c = p.number(j["lipschitz"], key_path(path, "lipschitz"));
        if (!c) return std::nullopt;
        if (*c < 0.0) {
            p.fail(key_path(path, "lipschitz"), "must be nonnegative");
            return std::nullopt;
        }
        out.lipschitz = *c;
    }
    return out;
}

LossSpec::Modulus linear_modulus(double c) {
    return [c](double d) { return c * d; };
}

bool parse_losses(Parser& p, const json& config, const ThetaGrid& grid, const Alphabet& xa, const Alphabet& ya,
                  std::uint64_t seed, std::size_t probes, Experiment& ex) {
    std::vector<ParsedLoss> parsed;
    std::string base_path;
    if (config.contains("losses")) {
        base_path = "losses";
        const json& list = config["losses"];
        if (!list.is_array() || (list.size() != 1 && list.size() != grid.size())) {
            p.fail("losses", "expected one loss or one per grid point (" + std::to_string(grid.size()) + ")");
            return false;
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            auto l = parse_loss(p, list[i], index_path("losses", i), xa, ya);
            if (!l) return false;
            parsed.push_back(std::move(*l));
        }
    } else if (config.contains("loss")) {
        base_path = "loss";
        auto l = parse_loss(p, config["loss"], "loss", xa, ya);
        if (!l) return false;
        parsed.push_back(std::move(*l));
    } else {
        p.fail("loss", "required field is missing");
        return false;
    }
    for (const auto& l : parsed) ex.losses.push_back(l.loss);
    const std::string lip_path = config.contains("losses") ? "losses[0].lipschitz" : "loss.lipschitz";
    if (parsed.front().lipschitz) {
        const auto modulus = linear_modulus(*parsed.front().lipschitz);
        for (auto& l : ex.losses) l = l.with_modulus(modulus);
        auto worst = p.guarded(base_path, [&] { return check_loss_assumption(ex.losses, grid, probes, seed); });
        if (!worst) return false;
        if (*worst > kAssumptionSlack) {
            p.fail(lip_path, "loss assumption probe exceeds the modulus by " + std::to_string(*worst));
            return false;
        }
        return true;
    }
    auto c = p.guarded(base_path, [&] { return certify_lipschitz_constant(ex.losses, grid); });
    if (!c) {
        p.fail(lip_path, "give an explicit Lipschitz constant for this loss family");
        return false;
    }
    const auto modulus = linear_modulus(*c);
    for (auto& l : ex.losses) l = l.with_modulus(modulus);
    return true;
}

void check_dp_guard(Parser& p, const Experiment& ex) {
    for (std::size_t i = 0; i < ex.family.size(); ++i) {
        const auto& model = ex.family[i];
        const std::size_t r = loss_at(ex.losses, i).range();
        const std::size_t depth = std::max(model.order(), r - 1);
        if (!p.guarded("family", [&] { return checked_power(model.alphabet_size(), depth, kMaxDpStates); })) return;
    }
}

void check_depths(Parser& p, const Experiment& ex) {
    const std::size_t nx = ex.model_alphabet->size();
    const std::size_t ny = ex.observed->output_alphabet().size();
    const std::size_t loss_range = ex.max_loss_range();
    std::size_t needed = std::max<std::size_t>(2, loss_range);
    for (const auto& m : ex.family) needed = std::max(needed, m.order() + 1);
    for (const auto& g : ex.gibbs_family) needed = std::max(needed, g.potential.range());
    if (!ex.observed->channel) needed = std::max(needed, ex.observed->source.order() + 1);
    for (std::size_t i = 0; i < ex.m_values.size(); ++i) {
        const std::string path = index_path("m_values", i);
        if (ex.m_values[i] < needed) {
            p.fail(path, "depth must be at least " + std::to_string(needed) + " for this family and loss");
            return;
        }
        if (!p.guarded(path, [&] { return checked_power(nx * ny, ex.m_values[i], kMaxJoiningWords); })) return;
    }
}

std::optional<std::vector<double>> positive_list(Parser& p, const json& j, const std::string& path) {
    auto v = p.numbers(j, path);
    if (!v) return std::nullopt;
    for (std::size_t i = 0; i < v->size(); ++i) {
        if (!((*v)[i] > 0.0)) {
            p.fail(v->size() == 1 ? path : index_path(path, i), "must be positive");
            return std::nullopt;
        }
    }
    return v;
}

void parse_hypermix(Parser& p, const json& j, Experiment& ex) {
    HypermixConfig h;
    if (j.contains("cls")) {
        auto v = positive_list(p, j["cls"], "hypermix.cls");
        if (!v) return;
        h.cls_values = *v;
    } else if (j.contains("rho")) {
        auto v = positive_list(p, j["rho"], "hypermix.rho");
        if (!v) return;
        for (double rho : *v) h.cls_values.push_back(1.0 / rho);
    } else {
        p.fail("hypermix", "expected 'cls' or 'rho'");
        return;
    }
    if (j.contains("cap")) {
        auto c = p.number(j["cap"], "hypermix.cap");
        if (!c) return;
        h.cap = *c;
    }
    h.ell_multipliers = {1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0};
    if (j.contains("ell_multipliers")) {
        auto v = positive_list(p, j["ell_multipliers"], "hypermix.ell_multipliers");
        if (!v) return;
        for (std::size_t i = 0; i < v->size(); ++i) {
            if ((*v)[i] < 1.0) {
                p.fail(index_path("hypermix.ell_multipliers", i), "the profile is defined from ell0 upward");
                return;
            }
        }
        h.ell_multipliers = *v;
    }
    ex.hypermix = std::move(h);
}

void parse_langevin(Parser& p, const json& j, Experiment& ex) {
    LangevinConfig l;
    const json* rj = p.member(j, "langevin", "rho", true);
    const json* sj = p.member(j, "langevin", "steps", true);
    if (!rj || !sj) return;
    auto rho = positive_list(p, *rj, "langevin.rho");
    auto steps = p.unsigned_integer(*sj, "langevin.steps");
    if (!rho || !steps) return;
    l.rho = *rho;
    l.steps = *steps;
    if (j.contains("dt")) {
        auto dt = p.number(j["dt"], "langevin.dt");
        if (!dt) return;
        if (!(*dt > 0.0)) {
            p.fail("langevin.dt", "must be positive");
            return;
        }
        l.dt = *dt;
    }
    l.x0.assign(l.rho.size(), 0.0);
    if (j.contains("x0")) {
        auto x0 = p.numbers(j["x0"], "langevin.x0");
        if (!x0) return;
        if (x0->size() != l.rho.size()) {
            p.fail("langevin.x0", "dimension must match langevin.rho");
            return;
        }
        l.x0 = *x0;
    }
    ex.langevin = std::move(l);
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
    switch (kind) {
        case ExperimentKind::Pressure: return "pressure";
        case ExperimentKind::EntropyRate: return "entropy-rate";
        case ExperimentKind::Partition: return "partition";
        case ExperimentKind::Posterior: return "posterior";
        case ExperimentKind::Variational: return "variational";
        case ExperimentKind::Hypermix: return "hypermix";
        case ExperimentKind::Simulate: return "simulate";
        case ExperimentKind::Consistency: return "consistency";
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
    for (auto k : {ExperimentKind::Pressure, ExperimentKind::EntropyRate, ExperimentKind::Partition,
                   ExperimentKind::Posterior, ExperimentKind::Variational, ExperimentKind::Hypermix,
                   ExperimentKind::Simulate, ExperimentKind::Consistency})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

std::string format_diagnostic(const Diagnostic& d) { return (d.path.empty() ? std::string("<root>") : d.path) + ": " + d.message; }

std::vector<std::uint64_t> Experiment::observation_seeds() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < replicates; ++i) out.push_back(seed + i);
    return out;
}

std::size_t Experiment::max_loss_range() const {
    std::size_t r = 1;
    for (const auto& l : losses) r = std::max(r, l.range());
    return r;
}

ParseResult parse_experiment(const json& config, ExperimentKind kind) {
    ParseResult result;
    if (!config.is_object()) {
        result.diagnostics.push_back({"", "configuration must be a JSON object"});
        return result;
    }
    Experiment ex;
    ex.kind = kind;
    Parser bootstrap(8);
    for (auto it = config.begin(); it != config.end(); ++it)
        if (!kTopLevelKeys.count(it.key())) bootstrap.fail(it.key(), "unknown field");
    if (config.contains("experiment")) {
        const json& e = config["experiment"];
        if (!e.is_string() || e.get<std::string>() != to_string(kind))
            bootstrap.fail("experiment", std::string("does not match the requested subcommand '") + to_string(kind) + "'");
    }
    if (config.contains("certify_depth")) {
        auto d = bootstrap.unsigned_integer(config["certify_depth"], "certify_depth");
        if (d) ex.certify_depth = *d;
    }
    Parser p(ex.certify_depth);
    p.diagnostics = std::move(bootstrap.diagnostics);

    if (config.contains("seed")) {
        if (auto s = p.unsigned_integer(config["seed"], "seed")) ex.seed = *s;
    }
    if (config.contains("replicates")) {
        auto r = p.unsigned_integer(config["replicates"], "replicates");
        if (r && *r == 0) p.fail("replicates", "must be at least 1");
        else if (r) ex.replicates = *r;
    }
    if (config.contains("probes")) {
        if (auto n = p.unsigned_integer(config["probes"], "probes")) ex.probes = *n;
    }
    if (config.contains("radius")) {
        auto r = p.number(config["radius"], "radius");
        if (r && *r < 0.0) p.fail("radius", "must be nonnegative");
        else if (r) ex.radius = *r;
    }
    if (config.contains("t_values")) {
        if (auto t = p.increasing_counts(config["t_values"], "t_values", 1)) ex.t_values = *t;
    }
    if (config.contains("m_values")) {
        if (auto m = p.increasing_counts(config["m_values"], "m_values", 1)) ex.m_values = *m;
    }
    if (config.contains("output") && !config["output"].is_string()) p.fail("output", "expected a directory path");

    auto require = [&](std::string_view key) {
        if (config.contains(key)) return true;
        p.fail(std::string(key), "required field is missing");
        return false;
    };
    const bool needs_family = kind == ExperimentKind::Pressure || kind == ExperimentKind::Partition ||
                              kind == ExperimentKind::Posterior || kind == ExperimentKind::Variational ||
                              kind == ExperimentKind::Consistency;
    const bool needs_loss = needs_family && kind != ExperimentKind::Pressure;
    const bool needs_t = kind == ExperimentKind::EntropyRate || kind == ExperimentKind::Partition ||
                         kind == ExperimentKind::Posterior || kind == ExperimentKind::Consistency;
    const bool needs_m = kind == ExperimentKind::Variational || kind == ExperimentKind::Consistency;

    if (needs_t && !config.contains("t_values")) p.fail("t_values", "required field is missing");
    if (needs_m && !config.contains("m_values")) p.fail("m_values", "required field is missing");

    if (needs_family && require("grid") && require("family")) {
        ex.grid = parse_grid(p, config["grid"]);
        if (ex.grid) {
            const bool ok = parse_family(p, config["family"], *ex.grid, ex);
            if (ok && kind == ExperimentKind::Pressure && ex.gibbs_family.empty())
                p.fail("family", "pressure needs a Gibbs family");
        }
    }
    const bool needs_observed = needs_loss || (kind == ExperimentKind::Simulate && !config.contains("langevin"));
    if (needs_observed && require("observed")) {
        ex.observed = parse_observed(p, config["observed"], ex.certify_depth, ex.model_alphabet);
    } else if (kind == ExperimentKind::Simulate && config.contains("observed")) {
        ex.observed = parse_observed(p, config["observed"], ex.certify_depth, ex.model_alphabet);
    }
    if (needs_loss && ex.grid && ex.model_alphabet && ex.observed && !ex.family.empty()) {
        if (parse_losses(p, config, *ex.grid, *ex.model_alphabet, ex.observed->output_alphabet(), ex.seed, ex.probes,
                         ex)) {
            check_dp_guard(p, ex);
            if (needs_m && !ex.m_values.empty()) check_depths(p, ex);
        }
    }

    if (kind == ExperimentKind::EntropyRate && require("entropy")) {
        const json& e = config["entropy"];
        const json* lj = p.member(e, "entropy", "lambda", true);
        const json* mj = p.member(e, "entropy", "mu", true);
        if (lj && mj) {
            auto lambda = p.model(*lj, "entropy.lambda");
            auto mu = p.model(*mj, "entropy.mu");
            if (lambda && mu) {
                if (!(lambda->markov.alphabet() == mu->markov.alphabet())) {
                    p.fail("entropy.mu.alphabet", "lambda and mu must share one alphabet");
                } else {
                    ex.entropy_lambda = lambda->markov;
                    ex.entropy_mu = mu->markov;
                    ex.entropy_mu_gibbs = mu->gibbs;
                }
            }
        }
    }
    if (kind == ExperimentKind::Hypermix && require("hypermix")) parse_hypermix(p, config["hypermix"], ex);
    if (kind == ExperimentKind::Simulate) {
        if (config.contains("langevin")) parse_langevin(p, config["langevin"], ex);
        if (ex.observed && ex.t_values.empty()) p.fail("t_values", "path simulation needs a length in t_values");
    }

    result.diagnostics = std::move(p.diagnostics);
    if (result.diagnostics.empty()) result.experiment = std::move(ex);
    return result;
}

}  // namespace varpost

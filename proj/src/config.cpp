#include "shelab/config.hpp"

#include <fstream>
#include <set>

#include "shelab/error.hpp"
#include "shelab/rng.hpp"

namespace shelab {

using nlohmann::json;

namespace {

// Reads optional keys from one JSON object and rejects anything it did not consume.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw Error("invalid-config", where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw Error("invalid-config", where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw Error("invalid-config", "unknown key " + where_ + "." + it.key());
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Error("invalid-config", what);
}

}  // namespace

void ExperimentConfig::validate() const {
    require(schema_version == kSchemaVersion, "unsupported schema_version");
    require(temporal.kind == "dirac" || temporal.kind == "power_law" || temporal.kind == "fractional",
            "temporal.kind must be dirac, power_law or fractional");
    require(spatial.kind == "dirac" || spatial.kind == "riesz" || spatial.kind == "fractional_product",
            "spatial.kind must be dirac, riesz or fractional_product");
    require(initial.kind == "constant" || initial.kind == "gaussian_bump",
            "initial.kind must be constant or gaussian_bump");
    require(!times.empty() && !points.empty(), "times and points must be nonempty");
    for (double t : times) require(t > 0.0, "times must be positive");
    for (double t : malliavin_times) require(t > 0.0, "malliavin_times must be positive");
    require(budgets.n_fields >= 2 && budgets.n_paths >= 1 && budgets.n_mc >= 2, "budgets must be positive");
    require(budgets.max_k >= 1, "budgets.max_k must be >= 1");
    require(density.mode == "ensemble" || density.mode == "injected_normal",
            "density.mode must be ensemble or injected_normal");
    require(density.n_injected >= 2 && density.eval_points >= 4, "density budgets too small");
    require(intensity > 0.0, "intensity must be positive");
    require(rho == 0.0 || rho > 1.0, "rho must be 0 (default) or > 1");
    require(!output_dir.empty(), "output_dir must be nonempty");
    const int d = make_spec(*this).dim();
    for (const auto& x : points) require(static_cast<int>(x.size()) == d, "point dimension differs from the kernel");
    smoothing.validate();
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["covariance"] = {
        {"temporal",
         {{"kind", c.temporal.kind}, {"alpha0", c.temporal.alpha0}, {"c0", c.temporal.c0}, {"C0", c.temporal.C0},
          {"hurst", c.temporal.hurst}}},
        {"spatial",
         {{"kind", c.spatial.kind}, {"alpha", c.spatial.alpha}, {"coefficient", c.spatial.coefficient},
          {"dim", c.spatial.dim}, {"hurst", c.spatial.hurst}}},
        {"amplitude", c.amplitude}};
    j["initial"] = {{"kind", c.initial.kind}, {"value", c.initial.value}, {"amplitude", c.initial.amplitude},
                    {"variance", c.initial.variance}};
    j["times"] = c.times;
    j["points"] = c.points;
    j["smoothing"] = {{"epsilon", c.smoothing.epsilon}, {"delta", c.smoothing.delta}};
    j["budgets"] = {{"n_fields", c.budgets.n_fields}, {"n_paths", c.budgets.n_paths}, {"n_mc", c.budgets.n_mc},
                    {"chaos_order", c.budgets.chaos_order}, {"max_k", c.budgets.max_k}};
    j["lattice"] = {{"dt", c.lattice.dt}, {"dx", c.lattice.dx}, {"L", c.lattice.L}};
    j["regularization"] = {{"steps", c.regularization.steps}, {"dx", c.regularization.dx}};
    j["intensity"] = c.intensity;
    j["rho"] = c.rho;
    j["malliavin_times"] = c.malliavin_times;
    j["density"] = {{"mode", c.density.mode}, {"n_injected", c.density.n_injected},
                    {"eval_points", c.density.eval_points}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    ObjectReader r(j, "config");
    if (!j.contains("schema_version")) throw Error("invalid-config", "missing schema_version");
    r.get("schema_version", c.schema_version);
    require(c.schema_version == kSchemaVersion, "unsupported schema_version");
    if (const json* cov = r.child("covariance")) {
        ObjectReader rc(*cov, "covariance");
        if (const json* t = rc.child("temporal")) {
            ObjectReader rt(*t, "covariance.temporal");
            rt.get("kind", c.temporal.kind);
            rt.get("alpha0", c.temporal.alpha0);
            rt.get("c0", c.temporal.c0);
            rt.get("C0", c.temporal.C0);
            rt.get("hurst", c.temporal.hurst);
            rt.finish();
        }
        if (const json* s = rc.child("spatial")) {
            ObjectReader rs(*s, "covariance.spatial");
            rs.get("kind", c.spatial.kind);
            rs.get("alpha", c.spatial.alpha);
            rs.get("coefficient", c.spatial.coefficient);
            rs.get("dim", c.spatial.dim);
            rs.get("hurst", c.spatial.hurst);
            rs.finish();
        }
        rc.get("amplitude", c.amplitude);
        rc.finish();
    }
    if (const json* i = r.child("initial")) {
        ObjectReader ri(*i, "initial");
        ri.get("kind", c.initial.kind);
        ri.get("value", c.initial.value);
        ri.get("amplitude", c.initial.amplitude);
        ri.get("variance", c.initial.variance);
        ri.finish();
    }
    r.get("times", c.times);
    r.get("points", c.points);
    if (const json* s = r.child("smoothing")) {
        ObjectReader rs(*s, "smoothing");
        rs.get("epsilon", c.smoothing.epsilon);
        rs.get("delta", c.smoothing.delta);
        rs.finish();
    }
    if (const json* b = r.child("budgets")) {
        ObjectReader rb(*b, "budgets");
        rb.get("n_fields", c.budgets.n_fields);
        rb.get("n_paths", c.budgets.n_paths);
        rb.get("n_mc", c.budgets.n_mc);
        rb.get("chaos_order", c.budgets.chaos_order);
        rb.get("max_k", c.budgets.max_k);
        rb.finish();
    }
    if (const json* l = r.child("lattice")) {
        ObjectReader rl(*l, "lattice");
        rl.get("dt", c.lattice.dt);
        rl.get("dx", c.lattice.dx);
        rl.get("L", c.lattice.L);
        rl.finish();
    }
    if (const json* g = r.child("regularization")) {
        ObjectReader rg(*g, "regularization");
        rg.get("steps", c.regularization.steps);
        rg.get("dx", c.regularization.dx);
        rg.finish();
    }
    r.get("intensity", c.intensity);
    r.get("rho", c.rho);
    r.get("malliavin_times", c.malliavin_times);
    if (const json* d = r.child("density")) {
        ObjectReader rd(*d, "density");
        rd.get("mode", c.density.mode);
        rd.get("n_injected", c.density.n_injected);
        rd.get("eval_points", c.density.eval_points);
        rd.finish();
    }
    r.get("seed", c.seed);
    r.get("output_dir", c.output_dir);
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io-error", "cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("invalid-config", std::string("parse error: ") + e.what());
    }
    return config_from_json(j);
}

CovarianceSpec make_spec(const ExperimentConfig& c) {
    TemporalKernel tk = DiracTime{};
    if (c.temporal.kind == "power_law")
        tk = PowerLawTime{c.temporal.alpha0, c.temporal.c0, c.temporal.C0};
    else if (c.temporal.kind == "fractional")
        tk = FractionalTime{c.temporal.hurst};
    SpatialKernel sk = DiracSpace{};
    if (c.spatial.kind == "riesz")
        sk = RieszSpace{c.spatial.alpha, c.spatial.coefficient, c.spatial.dim};
    else if (c.spatial.kind == "fractional_product")
        sk = FractionalProductSpace{c.spatial.hurst};
    return CovarianceSpec(tk, sk, c.amplitude);
}

InitialDatum make_initial(const ExperimentConfig& c) {
    if (c.initial.kind == "gaussian_bump")
        return InitialDatum::gaussian_bump(c.initial.amplitude, c.initial.variance, make_spec(c).dim());
    return InitialDatum::constant(c.initial.value);
}

std::uint64_t config_hash(const ExperimentConfig& c) { return fnv1a(to_json(c).dump()); }

}  // namespace shelab

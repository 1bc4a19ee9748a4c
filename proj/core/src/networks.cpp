#include "aal/networks.hpp"

#include "aal/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aal {

const char* to_string(ParamGroup g) {
    switch (g) {
    case ParamGroup::backbone: return "backbone";
    case ParamGroup::bottleneck: return "bottleneck";
    case ParamGroup::classifier_known: return "classifier_known";
    case ParamGroup::classifier_open: return "classifier_open";
    case ParamGroup::discriminator: return "discriminator";
    }
    return "?";
}

namespace {

template <typename Ref, typename Bundle>
std::vector<Ref> collect(Bundle& b) {
    std::vector<Ref> out;
    for (std::size_t i = 0; i < b.g.size(); ++i) {
        const ParamGroup grp = i + 1 == b.g.size() ? ParamGroup::bottleneck : ParamGroup::backbone;
        const std::string base = "g" + std::to_string(i);
        out.push_back({base + ".weight", &b.g[i].weight, grp});
        out.push_back({base + ".bias", &b.g[i].bias, grp});
    }
    out.push_back({"f_star.weight", &b.f_star.weight, ParamGroup::classifier_known});
    out.push_back({"f_star.bias", &b.f_star.bias, ParamGroup::classifier_known});
    out.push_back({"f_dyn.weight", &b.f_dyn.weight, ParamGroup::classifier_open});
    out.push_back({"f_dyn.bias", &b.f_dyn.bias, ParamGroup::classifier_open});
    for (std::size_t i = 0; i < b.d.size(); ++i) {
        const std::string base = "d" + std::to_string(i);
        out.push_back({base + ".weight", &b.d[i].weight, ParamGroup::discriminator});
        out.push_back({base + ".bias", &b.d[i].bias, ParamGroup::discriminator});
    }
    return out;
}

void check_layer(const Linear& l, std::size_t in, std::size_t out, const std::string& name) {
    if (l.weight.rows != in || l.weight.cols != out || l.bias.rows != 1 || l.bias.cols != out) {
        throw ContractError("layer " + name + " has weight " + l.weight.shape_string() + " and bias " +
                            l.bias.shape_string() + ", expected " + shape_string(in, out));
    }
}

Linear make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    Linear l{Matrix(in, out), Matrix(1, out, 0.0)};
    const double bound = glorot_bound(in, out);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : l.weight.data) w = dist(rng);
    return l;
}

} // namespace

std::vector<ParamRef> ModelBundle::parameters() { return collect<ParamRef>(*this); }
std::vector<ConstParamRef> ModelBundle::parameters() const { return collect<ConstParamRef>(*this); }

void ModelBundle::validate() const {
    if (g.size() != arch.g_hidden.size() + 1) {
        throw ContractError("G has " + std::to_string(g.size()) + " layers, architecture expects " +
                            std::to_string(arch.g_hidden.size() + 1));
    }
    std::size_t in = arch.d_in;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t out = i < arch.g_hidden.size() ? arch.g_hidden[i] : arch.d_b;
        check_layer(g[i], in, out, "g" + std::to_string(i));
        in = out;
    }
    check_layer(f_star, arch.d_b, arch.c, "f_star");
    check_layer(f_dyn, arch.d_b, arch.c + 1, "f_dyn");
    check_layer(d[0], arch.d_b * arch.c, arch.h_d, "d0");
    check_layer(d[1], arch.h_d, arch.h_d, "d1");
    check_layer(d[2], arch.h_d, 1, "d2");
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ModelBundle init_bundle(const Architecture& arch, std::mt19937_64& rng) {
    if (arch.d_in == 0 || arch.c == 0 || arch.d_b == 0 || arch.h_d == 0) {
        throw ContractError("init_bundle: architecture dimensions must be positive");
    }
    ModelBundle m;
    m.arch = arch;
    std::size_t in = arch.d_in;
    for (std::size_t w : arch.g_hidden) {
        if (w == 0) throw ContractError("init_bundle: hidden width must be positive");
        m.g.push_back(make_linear(in, w, rng));
        in = w;
    }
    m.g.push_back(make_linear(in, arch.d_b, rng));
    m.f_star = make_linear(arch.d_b, arch.c, rng);
    m.f_dyn = make_linear(arch.d_b, arch.c + 1, rng);
    m.d[0] = make_linear(arch.d_b * arch.c, arch.h_d, rng);
    m.d[1] = make_linear(arch.h_d, arch.h_d, rng);
    m.d[2] = make_linear(arch.h_d, 1, rng);
    return m;
}

// ---------------------------------------------------------------------------

std::vector<ad::Value> BoundModel::leaves() const {
    std::vector<ad::Value> out;
    for (const auto& l : g) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    for (const BoundLinear* l : {&f_star, &f_dyn, &d[0], &d[1], &d[2]}) {
        out.push_back(l->weight);
        out.push_back(l->bias);
    }
    return out;
}

BoundModel bind(ad::Tape& tape, const ModelBundle& model, bool trainable) {
    auto put = [&](const Linear& l) {
        return BoundLinear{tape.leaf(l.weight, trainable), tape.leaf(l.bias, trainable)};
    };
    BoundModel b;
    b.model = &model;
    for (const auto& l : model.g) b.g.push_back(put(l));
    b.f_star = put(model.f_star);
    b.f_dyn = put(model.f_dyn);
    for (std::size_t i = 0; i < 3; ++i) b.d[i] = put(model.d[i]);
    return b;
}

BoundModel bind_leaves(const ModelBundle& model, std::span<const ad::Value> leaves) {
    const std::size_t expected = 2 * (model.g.size() + 5);
    if (leaves.size() != expected) {
        throw ContractError("bind_leaves: " + std::to_string(leaves.size()) + " leaves, expected " +
                            std::to_string(expected));
    }
    std::size_t k = 0;
    auto take = [&]() {
        BoundLinear l{leaves[k], leaves[k + 1]};
        k += 2;
        return l;
    };
    BoundModel b;
    b.model = &model;
    for (std::size_t i = 0; i < model.g.size(); ++i) b.g.push_back(take());
    b.f_star = take();
    b.f_dyn = take();
    for (auto& l : b.d) l = take();
    return b;
}

ad::Value linear(const BoundLinear& layer, const ad::Value& x) {
    return ad::add_row(ad::matmul(x, layer.weight), layer.bias);
}

ad::Value extract_features(const BoundModel& m, const ad::Value& x) {
    ad::Value h = x;
    for (std::size_t i = 0; i < m.g.size(); ++i) {
        h = linear(m.g[i], h);
        if (i + 1 < m.g.size()) h = ad::relu(h);
    }
    return h;
}

ad::Value classify_known(const BoundModel& m, const ad::Value& features) {
    return ad::softmax_rows(linear(m.f_star, features));
}

ad::Value classify_open(const BoundModel& m, const ad::Value& features) {
    return ad::softmax_rows(linear(m.f_dyn, features));
}

ad::Value discriminate(const BoundModel& m, const ad::Value& features, const ad::Value& p_star,
                       double lambda, const std::optional<DropoutPlan>& dropout) {
    ad::Value h = ad::grad_reverse(ad::outer_flatten(features, ad::detach(p_star)), lambda);
    for (std::size_t i = 0; i < 2; ++i) {
        h = ad::relu(linear(m.d[i], h));
        if (dropout) h = ad::dropout(h, dropout->rate, dropout->seed * 2 + i);
    }
    return ad::sigmoid(linear(m.d[2], h));
}

double grl_coefficient(double constant, bool ramp, double progress) {
    if (!ramp) return constant;
    return constant * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model,
                     std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash));
    const Architecture& a = model.arch;
    out << "aal-checkpoint 1\n";
    out << "config_hash " << buf << "\n";
    out << "arch " << a.d_in << ' ' << a.c << ' ' << a.d_b << ' ' << a.h_d << ' ' << a.g_hidden.size();
    for (std::size_t w : a.g_hidden) out << ' ' << w;
    out << "\n";
    for (const auto& p : model.parameters()) {
        out << "param " << p.name << ' ' << p.value->rows << ' ' << p.value->cols << "\n";
        for (std::size_t r = 0; r < p.value->rows; ++r) {
            auto row = p.value->row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%a", row[c]);
                out << (c ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    out << "end\n";
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint " + path.string(), 0);
    std::size_t line_no = 0;
    std::string line;
    auto next = [&]() -> std::istringstream {
        if (!std::getline(in, line)) throw ParseError("unexpected end of checkpoint", line_no + 1);
        ++line_no;
        return std::istringstream(line);
    };

    std::string tag;
    int version = 0;
    if (!(next() >> tag >> version) || tag != "aal-checkpoint" || version != 1) {
        throw ParseError("not an aal checkpoint", line_no);
    }
    Checkpoint ck;
    {
        std::string hex;
        if (!(next() >> tag >> hex) || tag != "config_hash") throw ParseError("missing config_hash", line_no);
        ck.config_hash = std::stoull(hex, nullptr, 16);
    }
    Architecture arch;
    {
        std::size_t n_hidden = 0;
        auto ss = next();
        if (!(ss >> tag >> arch.d_in >> arch.c >> arch.d_b >> arch.h_d >> n_hidden) || tag != "arch") {
            throw ParseError("malformed arch record", line_no);
        }
        arch.g_hidden.resize(n_hidden);
        for (auto& w : arch.g_hidden) {
            if (!(ss >> w)) throw ParseError("malformed arch record", line_no);
        }
    }
    std::mt19937_64 unused(0);
    ck.model = init_bundle(arch, unused);
    for (const auto& p : ck.model.parameters()) {
        std::string name;
        std::size_t rows = 0;
        std::size_t cols = 0;
        if (!(next() >> tag >> name >> rows >> cols) || tag != "param") {
            throw ParseError("expected param record", line_no);
        }
        if (name != p.name || rows != p.value->rows || cols != p.value->cols) {
            throw ParseError("parameter " + name + " " + shape_string(rows, cols) + " does not match " +
                                 p.name + " " + p.value->shape_string(),
                             line_no);
        }
        for (std::size_t r = 0; r < rows; ++r) {
            auto ss = next();
            auto row = p.value->row(r);
            for (std::size_t c = 0; c < cols; ++c) {
                std::string tok;
                if (!(ss >> tok)) throw ParseError("short parameter row", line_no);
                char* end = nullptr;
                row[c] = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0') throw ParseError("bad number '" + tok + "'", line_no);
            }
        }
    }
    if (!(next() >> tag) || tag != "end") throw ParseError("missing end marker", line_no);
    return ck;
}

} // namespace aal

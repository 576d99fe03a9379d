#include "milgrade/mil.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "milgrade/binio.hpp"
#include "milgrade/errors.hpp"
#include "milgrade/numerics.hpp"
#include "milgrade/rng.hpp"

namespace milgrade {

void MilConfig::validate() const {
    if (input_dim < 1 || proj_dim < 1 || attn_dim < 1) {
        throw ContractError("MilConfig: all dimensions must be >= 1");
    }
    if (n_classes < 2) {
        throw ContractError("MilConfig: n_classes must be >= 2");
    }
}

void Bag::validate() const {
    if (embeddings.rows < 1) {
        throw ContractError("Bag " + slide_id + ": empty bag");
    }
    if (coords.size() != embeddings.rows) {
        throw ContractError("Bag " + slide_id + ": coords length " +
                            std::to_string(coords.size()) + " != n_patches " +
                            std::to_string(embeddings.rows));
    }
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    for (const Coord& c : coords) {
        if (!seen.insert({c.x, c.y}).second) {
            throw ContractError("Bag " + slide_id + ": duplicate coord (" +
                                std::to_string(c.x) + "," + std::to_string(c.y) + ")");
        }
    }
}

namespace {

void fill_xavier(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data) v = rng.uniform(-a, a);
}

double activate(double x, Activation act) {
    return act == Activation::rectified ? (x > 0.0 ? x : 0.0) : x;
}

} // namespace

MilParams init_params(const MilConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t d = config.input_dim;
    const std::size_t p = config.proj_dim;
    const std::size_t l = config.attn_dim;
    const std::size_t k = config.n_classes;

    MilParams params;
    params.w_proj = Matrix(p, d);
    params.b_proj = Matrix(p, 1);
    params.v_tanh = Matrix(l, p);
    params.u_gate = Matrix(l, p);
    params.w_attn = Matrix(k, l);
    params.w_clf = Matrix(k, p);
    params.b_clf = Matrix(k, 1);

    Rng rng(seed);
    fill_xavier(params.w_proj, d, p, rng);
    fill_xavier(params.v_tanh, p, l, rng);
    fill_xavier(params.u_gate, p, l, rng);
    fill_xavier(params.w_attn, l, k, rng);
    fill_xavier(params.w_clf, p, k, rng);
    return params;
}

MilModel init_model(const MilConfig& config, std::uint64_t seed) {
    return MilModel{config, init_params(config, seed)};
}

Matrix attention_from_scores(const Matrix& scores) {
    const std::size_t n = scores.rows;
    const std::size_t k = scores.cols;
    if (n == 0) throw ContractError("attention_from_scores: empty bag");
    Matrix attn(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        double mx = scores(0, c);
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, scores(i, c));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            attn(i, c) = std::exp(scores(i, c) - mx);
            sum += attn(i, c);
        }
        for (std::size_t i = 0; i < n; ++i) attn(i, c) /= sum;
    }
    return attn;
}

namespace {

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
    Matrix preact;    // N x P, before the projection activation
    Matrix projected; // N x P, z_i
    Matrix tanh_br;   // N x L
    Matrix gate_br;   // N x L
    Matrix gated;     // N x L, tanh branch (.) gate branch
    MilOutput out;
};

ForwardTrace mil_forward_trace(const MilModel& model, const Bag& bag) {
    const MilConfig& cfg = model.config;
    const MilParams& w = model.params;
    bag.validate();
    if (bag.embeddings.cols != cfg.input_dim) {
        throw DimensionError("mil_forward: bag dim " + std::to_string(bag.embeddings.cols) +
                             " != model input_dim " + std::to_string(cfg.input_dim));
    }

    ForwardTrace tr;
    const std::size_t n = bag.embeddings.rows;
    const std::size_t p = cfg.proj_dim;
    const std::size_t k = cfg.n_classes;

    // z_i = act(W_proj h_i + b_proj)
    tr.preact = matmul_nt(bag.embeddings, w.w_proj);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = tr.preact.row(i);
        for (std::size_t j = 0; j < p; ++j) row[j] += w.b_proj(j, 0);
    }
    tr.projected = Matrix(n, p);
    for (std::size_t i = 0; i < tr.preact.data.size(); ++i) {
        tr.projected.data[i] = activate(tr.preact.data[i], cfg.proj_activation);
    }

    // Gated attention: s_{i,c} = w_attn[c] . (tanh(V z_i) (.) sigm(U z_i))
    tr.tanh_br = matmul_nt(tr.projected, w.v_tanh);
    for (double& v : tr.tanh_br.data) v = std::tanh(v);
    tr.gate_br = matmul_nt(tr.projected, w.u_gate);
    for (double& v : tr.gate_br.data) v = sigmoid(v);
    tr.gated = hadamard(tr.tanh_br, tr.gate_br);

    const Matrix scores = matmul_nt(tr.gated, w.w_attn); // N x K
    tr.out.attention = attention_from_scores(scores);

    // bag_rep_c = sum_i a_{i,c} z_i; logit_c = W_clf[c] . bag_rep_c + b_clf[c]
    tr.out.bag_reps = matmul_tn(tr.out.attention, tr.projected); // K x P
    tr.out.logits.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        double acc = w.b_clf(c, 0);
        const double* wr = w.w_clf.row(c);
        const double* rr = tr.out.bag_reps.row(c);
        for (std::size_t j = 0; j < p; ++j) acc += wr[j] * rr[j];
        tr.out.logits[c] = acc;
    }
    return tr;
}

} // namespace

MilOutput mil_forward(const MilModel& model, const Bag& bag) {
    return mil_forward_trace(model, bag).out;
}

std::pair<double, MilParams> mil_loss_and_grad(const MilModel& model, const Bag& bag) {
    if (!bag.label.has_value()) {
        throw ContractError("mil_loss_and_grad: bag " + bag.slide_id + " has no label");
    }
    const MilConfig& cfg = model.config;
    const MilParams& w = model.params;
    const int label = *bag.label;
    if (label < 0 || static_cast<std::size_t>(label) >= cfg.n_classes) {
        throw ContractError("mil_loss_and_grad: label " + std::to_string(label) +
                            " out of range for " + std::to_string(cfg.n_classes) + " classes");
    }

    const ForwardTrace tr = mil_forward_trace(model, bag);
    const std::size_t n = bag.embeddings.rows;
    const std::size_t k = cfg.n_classes;
    const std::size_t l = cfg.attn_dim;

    const double loss = cross_entropy_from_logits(tr.out.logits, label);

    // d loss / d logits = softmax(logits) - onehot(label)
    std::vector<double> dlogits = softmax(tr.out.logits);
    dlogits[static_cast<std::size_t>(label)] -= 1.0;

    MilParams g;
    g.b_clf = Matrix(k, 1);
    g.w_clf = Matrix(k, cfg.proj_dim);
    Matrix dreps(k, cfg.proj_dim); // d loss / d bag_reps
    for (std::size_t c = 0; c < k; ++c) {
        const double dl = dlogits[c];
        g.b_clf(c, 0) = dl;
        const double* rep = tr.out.bag_reps.row(c);
        const double* wc = w.w_clf.row(c);
        double* gw = g.w_clf.row(c);
        double* dr = dreps.row(c);
        for (std::size_t j = 0; j < cfg.proj_dim; ++j) {
            gw[j] = dl * rep[j];
            dr[j] = dl * wc[j];
        }
    }

    // Pooling: bag_reps = attention^T Z
    Matrix dattn = matmul_nt(tr.projected, dreps); // N x K
    Matrix dproj = matmul(tr.out.attention, dreps); // N x P, pooling path

    // Softmax over instances, per class column.
    Matrix dscores(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += tr.out.attention(i, c) * dattn(i, c);
        for (std::size_t i = 0; i < n; ++i) {
            dscores(i, c) = tr.out.attention(i, c) * (dattn(i, c) - dot);
        }
    }

    // scores = gated w_attn^T
    g.w_attn = matmul_tn(dscores, tr.gated); // K x L
    const Matrix dgated = matmul(dscores, w.w_attn); // N x L

    // gated = tanh_br (.) gate_br
    Matrix dtanh_in(n, l);
    Matrix dgate_in(n, l);
    for (std::size_t i = 0; i < dgated.data.size(); ++i) {
        const double t = tr.tanh_br.data[i];
        const double s = tr.gate_br.data[i];
        dtanh_in.data[i] = dgated.data[i] * s * (1.0 - t * t);
        dgate_in.data[i] = dgated.data[i] * t * s * (1.0 - s);
    }
    g.v_tanh = matmul_tn(dtanh_in, tr.projected); // L x P
    g.u_gate = matmul_tn(dgate_in, tr.projected);
    add_scaled(dproj, matmul(dtanh_in, w.v_tanh));
    add_scaled(dproj, matmul(dgate_in, w.u_gate));

    // Projection activation.
    if (cfg.proj_activation == Activation::rectified) {
        for (std::size_t i = 0; i < dproj.data.size(); ++i) {
            if (tr.preact.data[i] <= 0.0) dproj.data[i] = 0.0;
        }
    }
    g.w_proj = matmul_tn(dproj, bag.embeddings); // P x D
    g.b_proj = Matrix(cfg.proj_dim, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = dproj.row(i);
        for (std::size_t j = 0; j < cfg.proj_dim; ++j) g.b_proj(j, 0) += row[j];
    }
    return {loss, g};
}

MilPrediction predict(const MilModel& model, const Bag& bag) {
    MilOutput out = mil_forward(model, bag);
    MilPrediction pred;
    pred.cls = argmax_lowest(out.logits);
    pred.logits = std::move(out.logits);
    pred.attention = std::move(out.attention);
    return pred;
}

std::vector<double> flatten_params(const MilParams& p) {
    std::vector<double> flat;
    flat.reserve(p.w_proj.size() + p.b_proj.size() + p.v_tanh.size() + p.u_gate.size() +
                 p.w_attn.size() + p.w_clf.size() + p.b_clf.size());
    for (const Matrix* m : {&p.w_proj, &p.b_proj, &p.v_tanh, &p.u_gate, &p.w_attn, &p.w_clf,
                            &p.b_clf}) {
        flat.insert(flat.end(), m->data.begin(), m->data.end());
    }
    return flat;
}

void unflatten_params(const std::vector<double>& flat, MilParams& p) {
    std::size_t off = 0;
    for (Matrix* m : {&p.w_proj, &p.b_proj, &p.v_tanh, &p.u_gate, &p.w_attn, &p.w_clf,
                      &p.b_clf}) {
        if (off + m->size() > flat.size()) {
            throw ContractError("unflatten_params: flat vector too short");
        }
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + m->size()),
                  m->data.begin());
        off += m->size();
    }
    if (off != flat.size()) {
        throw ContractError("unflatten_params: flat vector too long");
    }
}

namespace {

constexpr char kMilMagic[4] = {'M', 'I', 'L', 'P'};
constexpr std::uint32_t kMilVersion = 1;

void write_block(std::ostream& os, const Matrix& m) {
    for (double v : m.data) write_f64le(os, v);
}

void read_block(std::istream& is, Matrix& m, const std::string& what) {
    for (double& v : m.data) v = read_f64le(is, what);
}

} // namespace

void save_mil_checkpoint(const MilModel& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("save_mil_checkpoint: cannot open " + path.string());
    write_magic(os, kMilMagic);
    write_u32le(os, kMilVersion);
    write_u32le(os, static_cast<std::uint32_t>(model.config.input_dim));
    write_u32le(os, static_cast<std::uint32_t>(model.config.proj_dim));
    write_u32le(os, static_cast<std::uint32_t>(model.config.attn_dim));
    write_u32le(os, static_cast<std::uint32_t>(model.config.n_classes));
    write_u8(os, static_cast<std::uint8_t>(model.config.proj_activation));
    const MilParams& p = model.params;
    for (const Matrix* m : {&p.w_proj, &p.b_proj, &p.v_tanh, &p.u_gate, &p.w_attn, &p.w_clf,
                            &p.b_clf}) {
        write_block(os, *m);
    }
    if (!os) throw FormatError("save_mil_checkpoint: write failed for " + path.string());
}

MilModel load_mil_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("load_mil_checkpoint: cannot open " + path.string());
    const std::string what = "mil checkpoint " + path.string();
    expect_magic(is, kMilMagic, what);
    expect_version(is, kMilVersion, what);

    MilConfig cfg;
    cfg.input_dim = read_u32le(is, what);
    cfg.proj_dim = read_u32le(is, what);
    cfg.attn_dim = read_u32le(is, what);
    cfg.n_classes = read_u32le(is, what);
    const std::uint8_t act = read_u8(is, what);
    if (act > 1) throw FormatError(what + ": unknown activation tag " + std::to_string(act));
    cfg.proj_activation = static_cast<Activation>(act);
    cfg.validate();

    MilModel model;
    model.config = cfg;
    model.params.w_proj = Matrix(cfg.proj_dim, cfg.input_dim);
    model.params.b_proj = Matrix(cfg.proj_dim, 1);
    model.params.v_tanh = Matrix(cfg.attn_dim, cfg.proj_dim);
    model.params.u_gate = Matrix(cfg.attn_dim, cfg.proj_dim);
    model.params.w_attn = Matrix(cfg.n_classes, cfg.attn_dim);
    model.params.w_clf = Matrix(cfg.n_classes, cfg.proj_dim);
    model.params.b_clf = Matrix(cfg.n_classes, 1);
    MilParams& p = model.params;
    for (Matrix* m : {&p.w_proj, &p.b_proj, &p.v_tanh, &p.u_gate, &p.w_attn, &p.w_clf,
                      &p.b_clf}) {
        read_block(is, *m, what);
    }
    return model;
}

} // namespace milgrade

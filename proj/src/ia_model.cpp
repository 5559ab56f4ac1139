#include "ia/ia_model.hpp"

#include <cmath>

namespace ia {

using nlohmann::json;

void IAConfig::validate() const {
    if (model_width <= 0 || fourier_dim <= 0 || n_heads <= 0 || mlp_hidden <= 0 ||
        decoder_mid_channels <= 0 || patch_size <= 0 || image_size <= 0 || text_dim <= 0 ||
        visual_dim <= 0)
        throw ValidationError("IAConfig: all dimensions must be positive");
    if (fourier_dim % 8 != 0)
        throw ValidationError("IAConfig: fourier_dim must be divisible by 8");
    if (model_width % n_heads != 0)
        throw ValidationError("IAConfig: model_width must be divisible by n_heads");
    if (image_size % patch_size != 0)
        throw ValidationError("IAConfig: image_size must be divisible by patch_size");
    for (const auto& a : ablation)
        if (a != "PA" && a != "VA" && a != "HOCB" && a != "ICB")
            throw ValidationError("IAConfig: unknown ablation unit " + a);
}

json IAConfig::to_json() const {
    json j;
    j["model_width"] = model_width;
    j["fourier_dim"] = fourier_dim;
    j["n_heads"] = n_heads;
    j["mlp_hidden"] = mlp_hidden;
    j["decoder_mid_channels"] = decoder_mid_channels;
    j["patch_size"] = patch_size;
    j["image_size"] = image_size;
    j["text_dim"] = text_dim;
    j["visual_dim"] = visual_dim;
    j["ablation"] = std::vector<std::string>(ablation.begin(), ablation.end());
    return j;
}

IAConfig IAConfig::from_json(const json& j) {
    IAConfig c;
    c.model_width = j.at("model_width").get<int>();
    c.fourier_dim = j.at("fourier_dim").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.decoder_mid_channels = j.at("decoder_mid_channels").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.text_dim = j.at("text_dim").get<int>();
    c.visual_dim = j.at("visual_dim").get<int>();
    for (const auto& a : j.at("ablation")) c.ablation.insert(a.get<std::string>());
    c.validate();
    return c;
}

IAConfig IAConfig::desk() { return IAConfig{}; }

IAConfig IAConfig::full_base() {
    IAConfig c;
    c.model_width = 256;
    c.fourier_dim = 64;
    c.n_heads = 8;
    c.mlp_hidden = 512;
    c.decoder_mid_channels = 128;
    c.patch_size = 16;
    c.image_size = 224;
    c.text_dim = 512;
    c.visual_dim = 768;
    return c;
}

IAConfig IAConfig::full_large() {
    IAConfig c = full_base();
    c.patch_size = 14;
    c.text_dim = 768;
    c.visual_dim = 1024;
    return c;
}

std::vector<double> fourier_embed(const std::vector<double>& coords, int n_bands) {
    if (n_bands < 1) throw ValidationError("fourier_embed: n_bands must be >= 1");
    for (double c : coords)
        if (!(c >= 0.0 && c <= 1.0))
            throw ValidationError("fourier_embed: coordinate " + std::to_string(c) +
                                  " outside [0,1]");
    std::vector<double> out;
    out.reserve(coords.size() * 2 * n_bands);
    for (double c : coords) {
        double freq = M_PI;  // 2^k * pi, k = 0..n_bands-1
        for (int k = 0; k < n_bands; ++k) {
            out.push_back(std::sin(freq * c));
            out.push_back(std::cos(freq * c));
            freq *= 2.0;
        }
    }
    return out;
}

double bce_loss(const AttentionMap& pred, const AttentionMap& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw ValidationError("bce_loss: shape mismatch");
    constexpr double eps = 1e-7;
    double s = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred.v[i], eps, 1.0 - eps);
        const double y = target.v[i];
        s += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    return s / pred.size();
}

std::array<double, 4> normalized_box(const std::array<double, 4>& box, int width, int height) {
    return {box[0] / width, box[1] / height, box[2] / width, box[3] / height};
}

IAModel IAModel::init(const IAConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    IAModel m;
    m.cfg = cfg;
    SplitMix64 rng(mix64(seed ^ 0x1a5d77c3b2e09f41ULL));
    auto& ps = m.store;
    const int d = cfg.model_width;

    const int pa_in_single = cfg.ablated("PA") ? cfg.text_dim : cfg.text_dim + cfg.fourier_dim;
    const int pa_in_pair = cfg.ablated("PA") ? cfg.text_dim : cfg.text_dim + 2 * cfg.fourier_dim;
    m.pa_h1_ = nn::make_linear(ps, "pa.human.l1", pa_in_single, cfg.mlp_hidden, rng);
    m.pa_h2_ = nn::make_linear(ps, "pa.human.l2", cfg.mlp_hidden, d, rng);
    m.pa_o1_ = nn::make_linear(ps, "pa.object.l1", pa_in_single, cfg.mlp_hidden, rng);
    m.pa_o2_ = nn::make_linear(ps, "pa.object.l2", cfg.mlp_hidden, d, rng);
    m.pa_i1_ = nn::make_linear(ps, "pa.inter.l1", pa_in_pair, cfg.mlp_hidden, rng);
    m.pa_i2_ = nn::make_linear(ps, "pa.inter.l2", cfg.mlp_hidden, d, rng);

    m.vproj_ = nn::make_linear(ps, "vproj", cfg.visual_dim, d, rng);
    if (!cfg.ablated("VA")) {
        m.va_layers_.push_back(
            nn::make_encoder_layer(ps, "va.l0", d, cfg.n_heads, cfg.mlp_hidden, rng));
        m.va_layers_.push_back(
            nn::make_encoder_layer(ps, "va.l1", d, cfg.n_heads, cfg.mlp_hidden, rng));
    }
    if (!cfg.ablated("HOCB"))
        m.hocb_attn_ = nn::make_mha(ps, "hocb.attn", d, cfg.n_heads, rng, /*zero_out_proj=*/true);
    if (!cfg.ablated("ICB")) {
        m.icb_cross_ = nn::make_mha(ps, "icb.cross", d, cfg.n_heads, rng, false);
        m.icb_gate_ = ps.add("icb.gate", 1, d, false);  // zero: block starts as identity
        m.icb_self_ = nn::make_mha(ps, "icb.self", d, cfg.n_heads, rng, /*zero_out_proj=*/true);
    }

    m.dec1_ = nn::make_linear(ps, "dec.conv1", d, cfg.decoder_mid_channels, rng);
    m.bn_gamma_ = ps.add("dec.bn.gamma", 1, cfg.decoder_mid_channels, false);
    m.bn_gamma_->value.fill(1.0);
    m.bn_beta_ = ps.add("dec.bn.beta", 1, cfg.decoder_mid_channels, false);
    ps.add_buffer("dec.bn.running_mean", 1, cfg.decoder_mid_channels, 0.0);
    ps.add_buffer("dec.bn.running_var", 1, cfg.decoder_mid_channels, 1.0);
    m.dec2_ = nn::make_linear(ps, "dec.conv2", cfg.decoder_mid_channels, 1, rng);
    return m;
}

ad::NodePtr IAModel::pa_mlp(ad::Tape& t, const nn::LinearP& l1, const nn::LinearP& l2,
                            const ad::NodePtr& in) {
    return nn::linear(t, t.relu(nn::linear(t, in, l1)), l2);
}

IAModel::Prototypes IAModel::build_prototypes(ad::Tape& t, const TextTriplet& trip,
                                              const std::array<double, 4>& human_box_norm,
                                              const std::array<double, 4>& object_box_norm) {
    if (static_cast<int>(trip.t_human.size()) != cfg.text_dim)
        throw ValidationError("prototypes: text width mismatch (config vs backend)");
    Prototypes out;
    if (cfg.ablated("PA")) {
        out.human = pa_mlp(t, pa_h1_, pa_h2_, t.constant(Tensor::row(trip.t_human)));
        out.object = pa_mlp(t, pa_o1_, pa_o2_, t.constant(Tensor::row(trip.t_object)));
        out.interaction = pa_mlp(t, pa_i1_, pa_i2_, t.constant(Tensor::row(trip.t_interaction)));
        return out;
    }
    const auto fh = fourier_embed({human_box_norm.begin(), human_box_norm.end()}, cfg.n_bands());
    const auto fo = fourier_embed({object_box_norm.begin(), object_box_norm.end()}, cfg.n_bands());
    auto cat = [&](const std::vector<double>& text,
                   std::initializer_list<const std::vector<double>*> extras) {
        std::vector<double> v = text;
        for (const auto* e : extras) v.insert(v.end(), e->begin(), e->end());
        return t.constant(Tensor::row(v));
    };
    out.human = pa_mlp(t, pa_h1_, pa_h2_, cat(trip.t_human, {&fh}));
    out.object = pa_mlp(t, pa_o1_, pa_o2_, cat(trip.t_object, {&fo}));
    out.interaction = pa_mlp(t, pa_i1_, pa_i2_, cat(trip.t_interaction, {&fh, &fo}));
    return out;
}

ad::NodePtr IAModel::build_visual(ad::Tape& t, const VisualTokens& vt) {
    if (vt.tokens.cols != cfg.visual_dim)
        throw ValidationError("visual tokens width mismatch (config vs backend)");
    if (vt.tokens.rows != vt.grid_rows * vt.grid_cols)
        throw ValidationError("visual tokens: M != grid_rows*grid_cols");
    auto x = nn::linear(t, t.constant(vt.tokens), vproj_);
    for (const auto& layer : va_layers_) x = nn::encoder_layer(t, x, layer);
    return x;
}

ad::NodePtr IAModel::build_hocb(ad::Tape& t, const ad::NodePtr& v_prime,
                                const ad::NodePtr& k_human, const ad::NodePtr& k_object) {
    if (cfg.ablated("HOCB")) return v_prime;
    const int m = v_prime->val.rows;
    auto seq = t.concat_rows({k_human, k_object, v_prime});
    auto attended = nn::mha(t, seq, seq, hocb_attn_).out;
    // Token gate: only the visual positions feed the residual.
    auto visual_part = t.slice_rows(attended, 2, m + 2);
    return t.add(v_prime, visual_part);
}

ad::NodePtr IAModel::build_icb(ad::Tape& t, const ad::NodePtr& v_ho,
                               const ad::NodePtr& k_inter) {
    if (cfg.ablated("ICB")) return v_ho;
    auto cross = nn::mha(t, v_ho, k_inter, icb_cross_).out;
    auto gated = t.mul_rowvec(cross, t.param(*icb_gate_));
    auto v_hoi = t.add(v_ho, gated);
    auto self = nn::mha(t, v_hoi, v_hoi, icb_self_).out;
    return t.add(v_hoi, self);
}

ad::NodePtr IAModel::build_decode(ad::Tape& t, const ad::NodePtr& v_hoi, int out_h, int out_w,
                                  bool training, bool update_stats) {
    const int m = v_hoi->val.rows;
    const int g = cfg.grid();
    if (m != g * g) throw ValidationError("decode: token count is not a full grid");
    auto h = nn::linear(t, v_hoi, dec1_);
    h = t.batch_norm_tokens(h, t.param(*bn_gamma_), t.param(*bn_beta_),
                            store.buffer("dec.bn.running_mean"),
                            store.buffer("dec.bn.running_var"), training, update_stats);
    h = t.relu(h);
    auto logits = nn::linear(t, h, dec2_);       // M×1
    auto squashed = t.sigmoid(logits);
    auto grid = t.reshape(squashed, g, g);
    return t.bilinear_up(grid, out_h, out_w);
}

ad::NodePtr IAModel::build_map(ad::Tape& t, const HOISample& s, const TextTriplet& trip,
                               const VisualTokens& vt, bool training, bool update_stats) {
    auto protos = build_prototypes(t, trip, normalized_box(s.human_box, s.width, s.height),
                                   normalized_box(s.object_box, s.width, s.height));
    auto v_prime = build_visual(t, vt);
    auto v_ho = build_hocb(t, v_prime, protos.human, protos.object);
    auto v_hoi = build_icb(t, v_ho, protos.interaction);
    return build_decode(t, v_hoi, s.height, s.width, training, update_stats);
}

namespace {

Tensor row_from(const std::vector<double>& v) { return Tensor::row(v); }

VisualTokens tokens_from_node(const ad::NodePtr& n, int grid_rows, int grid_cols) {
    VisualTokens vt;
    vt.grid_rows = grid_rows;
    vt.grid_cols = grid_cols;
    vt.tokens = n->val;
    return vt;
}

AttentionMap map_from_node(const ad::NodePtr& n) {
    AttentionMap m(n->val.rows, n->val.cols);
    m.v = n->val.d;
    return m;
}

}  // namespace

KnowledgePrototypes IAModel::positional_adapter(const TextTriplet& trip,
                                                const std::array<double, 4>& human_box_norm,
                                                const std::array<double, 4>& object_box_norm) {
    ad::Tape t;
    auto p = build_prototypes(t, trip, human_box_norm, object_box_norm);
    return {p.human->val.d, p.object->val.d, p.interaction->val.d};
}

VisualTokens IAModel::visual_adapter(const VisualTokens& vt) {
    ad::Tape t;
    return tokens_from_node(build_visual(t, vt), vt.grid_rows, vt.grid_cols);
}

VisualTokens IAModel::hocb(const VisualTokens& v_prime, const KnowledgePrototypes& k) {
    ad::Tape t;
    auto out = build_hocb(t, t.constant(v_prime.tokens), t.constant(row_from(k.k_human)),
                          t.constant(row_from(k.k_object)));
    return tokens_from_node(out, v_prime.grid_rows, v_prime.grid_cols);
}

VisualTokens IAModel::icb(const VisualTokens& v_ho, const std::vector<double>& k_interaction) {
    ad::Tape t;
    auto out = build_icb(t, t.constant(v_ho.tokens), t.constant(row_from(k_interaction)));
    return tokens_from_node(out, v_ho.grid_rows, v_ho.grid_cols);
}

AttentionMap IAModel::decode(const VisualTokens& v_hoi, int out_h, int out_w, bool training) {
    ad::Tape t;
    return map_from_node(
        build_decode(t, t.constant(v_hoi.tokens), out_h, out_w, training, false));
}

AttentionMap IAModel::forward_from_prototypes(const KnowledgePrototypes& k,
                                              const VisualTokens& raw, int out_h, int out_w) {
    ad::Tape t;
    auto v_prime = build_visual(t, raw);
    auto v_ho = build_hocb(t, v_prime, t.constant(row_from(k.k_human)),
                           t.constant(row_from(k.k_object)));
    auto v_hoi = build_icb(t, v_ho, t.constant(row_from(k.k_interaction)));
    return map_from_node(build_decode(t, v_hoi, out_h, out_w, false, false));
}

AttentionMap IAModel::predict(const HOISample& s, const Image& img,
                              const EncoderBackend& backend) {
    return ia_forward(s, img, backend, *this, false);
}

bool IAModel::has_cross_attention() const {
    for (const auto& p : store.params())
        if (p->name.rfind("icb.cross", 0) == 0) return true;
    return false;
}

AttentionMap ia_forward(const HOISample& s, const Image& img, const EncoderBackend& backend,
                        IAModel& model, bool training) {
    if (backend.text_dim() != model.cfg.text_dim ||
        backend.visual_dim() != model.cfg.visual_dim ||
        backend.patch_size() != model.cfg.patch_size ||
        backend.image_size() != model.cfg.image_size)
        throw ValidationError("ia_forward: encoder backend and model config disagree");
    const TextTriplet trip = encode_triplet(backend, s.object_label, s.interaction_label);
    const VisualTokens vt = backend.encode_image(img);
    ad::Tape t;
    auto out = model.build_map(t, s, trip, vt, training, training);
    AttentionMap m(out->val.rows, out->val.cols);
    m.v = out->val.d;
    return m;
}

}  // namespace ia

// SPDX-License-Identifier: Apache-2.0
#include "tridf/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tridf/encoding.hpp"

using nlohmann::json;

namespace tridf {

void FieldModel::init(const ModelConfig& config, const SceneDataset& scene) {
    cfg = config;
    bbox = scene.bbox;
    background = scene.background;
    train_cameras = scene.train_cameras();
    std::vector<Image> train_images;
    for (std::size_t id : scene.train_ids) train_images.push_back(scene.images[id]);
    ref_features = extract_reference_features(train_images, cfg.feature_seed);

    Rng rng(cfg.init_seed);
    planes.init(cfg.plane_res, cfg.plane_channels, rng);
    const std::size_t density_in = cfg.pe_dim() + ref_dim();
    density.init(density_in, cfg.density_width, 1 + cfg.fm_dim,
                 cfg.density_depth, rng);
    base.init(3 * cfg.plane_channels + cfg.fm_dim, cfg.base_width,
              cfg.base_width, cfg.base_depth, rng);
    color.init(cfg.base_width + 16, cfg.color_width, 3, cfg.color_depth, rng);

    // Start the field near-transparent: zero the sigma output row so the
    // initial raw value is exactly the bias.
    TensorF& lw = density.weights.back();
    const std::size_t out = lw.shape[1];
    for (std::size_t r = 0; r < lw.shape[0]; ++r) lw.data[r * out + 0] = 0.0;
    density.biases.back().data[0] = cfg.sigma_bias_init;
}

ModelHandles register_model(Tape& tape, const FieldModel& model) {
    return {register_triplane(tape, model.planes),
            register_mlp(tape, model.density), register_mlp(tape, model.base),
            register_mlp(tape, model.color)};
}

TensorF assemble_density_input(const FieldModel& model,
                               std::span<const Vec3> points) {
    const std::size_t pe = model.cfg.pe_dim();
    const std::size_t fr = model.ref_dim();
    TensorF out({points.size(), pe + fr}, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double* row = &out.data[i * (pe + fr)];
        const Vec3 xn = model.bbox.normalize(points[i]);
        const auto enc = positional_encode(xn, model.cfg.pe_freqs);
        std::memcpy(row, enc.data(), pe * sizeof(double));
        aggregate_reference(points[i], model.ref_features, model.train_cameras,
                            row + pe);
    }
    return out;
}

DensityOut density_field(Tape& tape, const FieldModel& model,
                         const ModelHandles& h, Value density_input) {
    const Value raw = mlp_forward(tape, h.density, density_input);
    const Value sigma = tape.softplus(tape.slice_cols(raw, 0, 1));
    const Value fm = tape.slice_cols(raw, 1, 1 + model.cfg.fm_dim);
    return {sigma, fm};
}

Value color_head(Tape& tape, const ModelHandles& h, Value f_tri, Value f_m,
                 Value sh) {
    const Value f_base = mlp_forward(tape, h.base, tape.concat_cols(f_tri, f_m));
    const Value raw = mlp_forward(tape, h.color, tape.concat_cols(f_base, sh));
    return tape.sigmoid(raw);
}

std::vector<double> FieldModel::eval_sigma(std::span<const Vec3> points) const {
    Tape tape;
    const ModelHandles h = register_model(tape, *this);
    std::vector<Vec3> clamped(points.begin(), points.end());
    for (Vec3& p : clamped) {
        p.x = std::clamp(p.x, bbox.min.x, bbox.max.x);
        p.y = std::clamp(p.y, bbox.min.y, bbox.max.y);
        p.z = std::clamp(p.z, bbox.min.z, bbox.max.z);
    }
    const Value input = tape.constant(assemble_density_input(*this, clamped));
    const DensityOut d = density_field(tape, *this, h, input);
    return tape.value(d.sigma).data;
}

namespace {

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n) {
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

constexpr char kMagic[8] = {'T', 'R', 'I', 'D', 'F', 'C', 'K', '1'};

}  // namespace

void FieldModel::save(const std::string& path) const {
    json hdr;
    hdr["plane_res"] = cfg.plane_res;
    hdr["plane_channels"] = cfg.plane_channels;
    hdr["density"] = {cfg.density_depth, cfg.density_width};
    hdr["base"] = {cfg.base_depth, cfg.base_width};
    hdr["color"] = {cfg.color_depth, cfg.color_width};
    hdr["pe_freqs"] = cfg.pe_freqs;
    hdr["fm_dim"] = cfg.fm_dim;
    hdr["feature_seed"] = cfg.feature_seed;
    hdr["init_seed"] = cfg.init_seed;
    hdr["n_train_views"] = train_cameras.size();
    json views = json::array();
    for (const Camera& cam : train_cameras)
        views.push_back({{"width", cam.K.width}, {"height", cam.K.height}});
    hdr["views"] = views;
    const std::string header = hdr.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 8);
    const std::uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::vector<double> blob;
    auto push = [&blob](std::initializer_list<double> vs) {
        blob.insert(blob.end(), vs);
    };
    push({bbox.min.x, bbox.min.y, bbox.min.z, bbox.max.x, bbox.max.y,
          bbox.max.z});
    push({background[0], background[1], background[2], cfg.sigma_bias_init});
    for (const Camera& cam : train_cameras) {
        push({cam.K.fx, cam.K.fy, cam.K.cx, cam.K.cy});
        for (double v : cam.E.R.m) blob.push_back(v);
        push({cam.E.T.x, cam.E.T.y, cam.E.T.z});
    }
    write_doubles(out, blob);
    write_doubles(out, planes.xy.data);
    write_doubles(out, planes.yz.data);
    write_doubles(out, planes.zx.data);
    for (const MlpParams* mlp : {&density, &base, &color}) {
        for (const TensorF& w : mlp->weights) write_doubles(out, w.data);
        for (const TensorF& b : mlp->biases) write_doubles(out, b.data);
    }
    for (const Image& f : ref_features) write_doubles(out, f.data);
    if (!out) throw std::runtime_error("checkpoint: write failed " + path);
}

FieldModel FieldModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("checkpoint: truncated header " + path);
    const json hdr = json::parse(header);

    FieldModel m;
    m.cfg.plane_res = hdr.at("plane_res").get<std::size_t>();
    m.cfg.plane_channels = hdr.at("plane_channels").get<std::size_t>();
    m.cfg.density_depth = hdr.at("density")[0].get<std::size_t>();
    m.cfg.density_width = hdr.at("density")[1].get<std::size_t>();
    m.cfg.base_depth = hdr.at("base")[0].get<std::size_t>();
    m.cfg.base_width = hdr.at("base")[1].get<std::size_t>();
    m.cfg.color_depth = hdr.at("color")[0].get<std::size_t>();
    m.cfg.color_width = hdr.at("color")[1].get<std::size_t>();
    m.cfg.pe_freqs = hdr.at("pe_freqs").get<std::size_t>();
    m.cfg.fm_dim = hdr.at("fm_dim").get<std::size_t>();
    m.cfg.feature_seed = hdr.at("feature_seed").get<std::uint64_t>();
    m.cfg.init_seed = hdr.at("init_seed").get<std::uint64_t>();
    const std::size_t n_views = hdr.at("n_train_views").get<std::size_t>();

    const auto blob = read_doubles(in, 10 + n_views * 16);
    std::size_t i = 0;
    m.bbox.min = {blob[i], blob[i + 1], blob[i + 2]};
    i += 3;
    m.bbox.max = {blob[i], blob[i + 1], blob[i + 2]};
    i += 3;
    m.background = {blob[i], blob[i + 1], blob[i + 2]};
    i += 3;
    m.cfg.sigma_bias_init = blob[i++];
    for (std::size_t v = 0; v < n_views; ++v) {
        Camera cam;
        cam.K.width = hdr.at("views")[v].at("width").get<std::size_t>();
        cam.K.height = hdr.at("views")[v].at("height").get<std::size_t>();
        cam.K.fx = blob[i++];
        cam.K.fy = blob[i++];
        cam.K.cx = blob[i++];
        cam.K.cy = blob[i++];
        for (double& r : cam.E.R.m) r = blob[i++];
        cam.E.T = {blob[i], blob[i + 1], blob[i + 2]};
        i += 3;
        m.train_cameras.push_back(cam);
    }

    const std::size_t r = m.cfg.plane_res, c = m.cfg.plane_channels;
    m.planes.resolution = r;
    m.planes.channels = c;
    for (TensorF* p : {&m.planes.xy, &m.planes.yz, &m.planes.zx})
        *p = TensorF({r * r, c}, read_doubles(in, r * r * c));

    auto read_mlp = [&](MlpParams& mlp, std::size_t in_dim, std::size_t width,
                        std::size_t out_dim, std::size_t depth) {
        std::vector<std::pair<std::size_t, std::size_t>> dims;
        std::size_t d_in = in_dim;
        for (std::size_t l = 0; l < depth; ++l) {
            const std::size_t d_out = (l + 1 == depth) ? out_dim : width;
            dims.emplace_back(d_in, d_out);
            d_in = d_out;
        }
        for (auto [a, b] : dims)
            mlp.weights.push_back(TensorF({a, b}, read_doubles(in, a * b)));
        for (auto [a, b] : dims) {
            (void)a;
            mlp.biases.push_back(
                TensorF({b}, read_doubles(in, b)));
        }
    };
    const std::size_t density_in =
        m.cfg.pe_dim() + n_views * kRefFeatureDim;
    read_mlp(m.density, density_in, m.cfg.density_width, 1 + m.cfg.fm_dim,
             m.cfg.density_depth);
    read_mlp(m.base, 3 * c + m.cfg.fm_dim, m.cfg.base_width, m.cfg.base_width,
             m.cfg.base_depth);
    read_mlp(m.color, m.cfg.base_width + 16, m.cfg.color_width, 3,
             m.cfg.color_depth);

    for (std::size_t v = 0; v < n_views; ++v) {
        const std::size_t w = m.train_cameras[v].K.width;
        const std::size_t h = m.train_cameras[v].K.height;
        Image f(h, w, kRefFeatureDim);
        f.data = read_doubles(in, h * w * kRefFeatureDim);
        m.ref_features.push_back(std::move(f));
    }
    return m;
}

}  // namespace tridf

#include "btseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "btseg/errors.hpp"
#include "btseg/io.hpp"
#include "btseg/rng.hpp"

namespace btseg::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Hash-indexed uniform in [-1, 1); pure in its inputs so texture lookups are
/// position-stable regardless of evaluation order.
double hash_unit(std::uint64_t seed, std::uint64_t key) {
    const std::uint64_t h = mix_seed(seed, key);
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double hash_normal(std::uint64_t seed, std::uint64_t key) {
    const double u1 = 0.5 * (hash_unit(seed, key * 2 + 1) + 1.0);
    const double u2 = 0.5 * (hash_unit(seed, key * 2 + 2) + 1.0);
    return std::sqrt(-2.0 * std::log(std::max(u1, 1e-12))) * std::cos(kTwoPi * u2);
}

/// Bilinear value noise on a 4-px lattice plus a fine per-pixel component.
double texture_at(std::uint64_t tex_seed, std::size_t y, std::size_t x, std::size_t world_w) {
    constexpr std::size_t cell = 4;
    const std::size_t lw = world_w / cell + 2;
    const std::size_t ly = y / cell, lx = x / cell;
    const double fy = static_cast<double>(y % cell) / cell;
    const double fx = static_cast<double>(x % cell) / cell;
    auto lattice = [&](std::size_t yy, std::size_t xx) {
        return hash_unit(tex_seed, yy * lw + xx);
    };
    const double top = (1.0 - fx) * lattice(ly, lx) + fx * lattice(ly, lx + 1);
    const double bot = (1.0 - fx) * lattice(ly + 1, lx) + fx * lattice(ly + 1, lx + 1);
    const double coarse = (1.0 - fy) * top + fy * bot;
    const double fine = hash_unit(tex_seed ^ 0x5eed, y * world_w + x);
    return 0.05 * coarse + 0.015 * fine;
}

struct Rgb {
    double r, g, b;
};

/// Class appearance is fixed per dataset seed so the label->color mapping is
/// learnable across samples.
std::vector<Rgb> make_palette(const SceneSpec& spec, const std::vector<std::int32_t>& static_ids,
                              const std::vector<std::int32_t>& mobile_ids) {
    static const Rgb structure_anchors[] = {
        {0.55, 0.52, 0.50}, {0.20, 0.42, 0.22}, {0.62, 0.44, 0.30}, {0.38, 0.38, 0.55},
    };
    static const Rgb mobile_anchors[] = {
        {0.78, 0.16, 0.16}, {0.88, 0.72, 0.18}, {0.18, 0.30, 0.78}, {0.70, 0.25, 0.62},
    };
    std::vector<Rgb> palette(static_cast<std::size_t>(spec.num_classes), Rgb{0.5, 0.5, 0.5});
    Rng rng(mix_seed(spec.seed, 0x9A1e77e));
    auto jitter = [&](Rgb base) {
        return Rgb{std::clamp(base.r + rng.uniform(-0.04, 0.04), 0.05, 0.95),
                   std::clamp(base.g + rng.uniform(-0.04, 0.04), 0.05, 0.95),
                   std::clamp(base.b + rng.uniform(-0.04, 0.04), 0.05, 0.95)};
    };
    palette[static_cast<std::size_t>(static_ids[0])] = jitter({0.55, 0.66, 0.86});  // sky
    palette[static_cast<std::size_t>(static_ids[1])] = jitter({0.34, 0.32, 0.30});  // ground
    for (std::size_t i = 2; i < static_ids.size(); ++i)
        palette[static_cast<std::size_t>(static_ids[i])] =
            jitter(structure_anchors[(i - 2) % std::size(structure_anchors)]);
    for (std::size_t i = 0; i < mobile_ids.size(); ++i)
        palette[static_cast<std::size_t>(mobile_ids[i])] =
            jitter(mobile_anchors[i % std::size(mobile_anchors)]);
    return palette;
}

struct MobileObject {
    std::int32_t cls;
    std::ptrdiff_t cx, cy;  // source-position center, world coords
    std::size_t half_w, half_h;
    std::ptrdiff_t dx = 0, dy = 0;  // displacement in the target view
};

void stamp_rect(IntTensor& labels, std::ptrdiff_t cy, std::ptrdiff_t cx, std::size_t half_h,
                std::size_t half_w, std::int32_t cls) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(labels.dim(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(labels.dim(1));
    for (std::ptrdiff_t y = cy - static_cast<std::ptrdiff_t>(half_h);
         y <= cy + static_cast<std::ptrdiff_t>(half_h); ++y)
        for (std::ptrdiff_t x = cx - static_cast<std::ptrdiff_t>(half_w);
             x <= cx + static_cast<std::ptrdiff_t>(half_w); ++x)
            if (y >= 0 && y < h && x >= 0 && x < w)
                labels.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = cls;
}

void stamp_ellipse(IntTensor& labels, std::ptrdiff_t cy, std::ptrdiff_t cx, std::size_t half_h,
                   std::size_t half_w, std::int32_t cls) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(labels.dim(0));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(labels.dim(1));
    const double rh = static_cast<double>(half_h) + 0.5;
    const double rw = static_cast<double>(half_w) + 0.5;
    for (std::ptrdiff_t y = cy - static_cast<std::ptrdiff_t>(half_h);
         y <= cy + static_cast<std::ptrdiff_t>(half_h); ++y)
        for (std::ptrdiff_t x = cx - static_cast<std::ptrdiff_t>(half_w);
             x <= cx + static_cast<std::ptrdiff_t>(half_w); ++x) {
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            const double ny = static_cast<double>(y - cy) / rh;
            const double nx = static_cast<double>(x - cx) / rw;
            if (ny * ny + nx * nx <= 1.0)
                labels.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = cls;
        }
}

Tensor render(const IntTensor& labels, const std::vector<Rgb>& palette, std::uint64_t tex_seed) {
    const std::size_t h = labels.dim(0), w = labels.dim(1);
    Tensor img({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const auto& c = palette[static_cast<std::size_t>(labels.at(y, x))];
            const double t = texture_at(tex_seed, y, x, w);
            img.at(0, y, x) = std::clamp(c.r + t, 0.0, 1.0);
            img.at(1, y, x) = std::clamp(c.g + t, 0.0, 1.0);
            img.at(2, y, x) = std::clamp(c.b + t, 0.0, 1.0);
        }
    return img;
}

void corrupt(Tensor& img, Corruption type, double strength, std::uint64_t noise_seed) {
    if (strength == 0.0) return;
    const std::size_t h = img.dim(1), w = img.dim(2);
    switch (type) {
        case Corruption::darken: {
            const double gamma = 1.0 + 2.0 * strength;
            const double gain = 1.0 - 0.6 * strength;
            for (auto& v : img.vec()) v = std::pow(v, gamma) * gain;
            break;
        }
        case Corruption::fog_blend: {
            constexpr double veil = 0.85;
            for (std::size_t y = 0; y < h; ++y) {
                const double depth =
                    h > 1 ? 1.0 - static_cast<double>(y) / static_cast<double>(h - 1) : 1.0;
                const double alpha = strength * (0.75 + 0.25 * depth);
                for (std::size_t x = 0; x < w; ++x)
                    for (std::size_t c = 0; c < 3; ++c)
                        img.at(c, y, x) = (1.0 - alpha) * img.at(c, y, x) + alpha * veil;
            }
            break;
        }
        case Corruption::noise: {
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) {
                        const double n = hash_normal(noise_seed, (c * h + y) * w + x);
                        img.at(c, y, x) =
                            std::clamp(img.at(c, y, x) + 0.25 * strength * n, 0.0, 1.0);
                    }
            break;
        }
        case Corruption::desaturate: {
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double lum = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
                                       0.114 * img.at(2, y, x);
                    for (std::size_t c = 0; c < 3; ++c)
                        img.at(c, y, x) = (1.0 - strength) * img.at(c, y, x) + strength * lum;
                }
            break;
        }
    }
}

IntTensor view_of(const IntTensor& world, std::size_t top, std::size_t left, std::size_t h,
                  std::size_t w) {
    IntTensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = world.at(top + i, left + j);
    return out;
}

Tensor view_of(const Tensor& world, std::size_t top, std::size_t left, std::size_t h,
               std::size_t w) {
    Tensor out({3, h, w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at(c, i, j) = world.at(c, top + i, left + j);
    return out;
}

}  // namespace

Corruption corruption_from_string(const std::string& s) {
    if (s == "darken") return Corruption::darken;
    if (s == "fog_blend") return Corruption::fog_blend;
    if (s == "noise") return Corruption::noise;
    if (s == "desaturate") return Corruption::desaturate;
    throw ConfigError("unknown corruption type: " + s);
}

std::string to_string(Corruption c) {
    switch (c) {
        case Corruption::darken: return "darken";
        case Corruption::fog_blend: return "fog_blend";
        case Corruption::noise: return "noise";
        case Corruption::desaturate: return "desaturate";
    }
    return "?";
}

void SceneSpec::validate() const {
    check(height >= 16 && width >= 16, "SceneSpec: image size too small");
    check(num_classes >= 2 && num_classes <= 32, "SceneSpec: num_classes must be in [2, 32]");
    check(corruption_strength >= 0.0 && corruption_strength <= 1.0,
          "SceneSpec: corruption strength must be in [0,1]");
    check(max_shift_px < std::min(height, width) / 4,
          "SceneSpec: max_shift_px must be below min(h,w)/4");
    for (auto id : mobile_class_ids)
        check(id >= 0 && id < num_classes, "SceneSpec: mobile class id out of range");
    check(static_cast<int>(mobile_class_ids.size()) <= num_classes - 2,
          "SceneSpec: at least two static classes required");
}

nlohmann::json SceneSpec::to_json() const {
    nlohmann::json j;
    j["image_size"] = {height, width};
    j["num_classes"] = num_classes;
    j["mobile_class_ids"] = mobile_class_ids;
    j["corruption"] = to_string(corruption);
    j["corruption_strength"] = corruption_strength;
    j["max_shift_px"] = max_shift_px;
    j["mobile_object_count"] = mobile_object_count;
    j["seed"] = seed;
    return j;
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.height = j.at("image_size").at(0).get<std::size_t>();
    s.width = j.at("image_size").at(1).get<std::size_t>();
    s.num_classes = j.at("num_classes").get<int>();
    s.mobile_class_ids = j.at("mobile_class_ids").get<std::set<std::int32_t>>();
    s.corruption = corruption_from_string(j.at("corruption").get<std::string>());
    s.corruption_strength = j.at("corruption_strength").get<double>();
    s.max_shift_px = j.at("max_shift_px").get<std::size_t>();
    s.mobile_object_count = j.at("mobile_object_count").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

PairedSample generate_pair(const SceneSpec& spec, std::size_t index) {
    spec.validate();
    const std::uint64_t scene_seed = mix_seed(spec.seed, index);
    Rng rng(scene_seed);

    const std::size_t S = spec.max_shift_px;
    const std::size_t h = spec.height, w = spec.width;
    const std::size_t wh = h + 2 * S, ww = w + 2 * S;

    std::vector<std::int32_t> static_ids, mobile_ids;
    for (std::int32_t c = 0; c < spec.num_classes; ++c)
        (spec.mobile_class_ids.count(c) ? mobile_ids : static_ids).push_back(c);
    const auto palette = make_palette(spec, static_ids, mobile_ids);

    // Static world: sky over ground, with structure blocks rising from the
    // horizon when spare static classes exist.
    IntTensor world_static({wh, ww});
    const std::size_t horizon =
        static_cast<std::size_t>(std::llround(rng.uniform(0.35, 0.5) * static_cast<double>(wh)));
    for (std::size_t y = 0; y < wh; ++y)
        for (std::size_t x = 0; x < ww; ++x)
            world_static.at(y, x) = y < horizon ? static_ids[0] : static_ids[1];

    if (static_ids.size() > 2) {
        const std::size_t n_struct = 2 + static_cast<std::size_t>(rng.uniform_int(0, 2));
        for (std::size_t k = 0; k < n_struct; ++k) {
            const std::int32_t cls = static_ids[2 + k % (static_ids.size() - 2)];
            const std::size_t half_w = static_cast<std::size_t>(
                std::llround(rng.uniform(0.06, 0.14) * static_cast<double>(ww)));
            const std::size_t half_h = static_cast<std::size_t>(
                std::llround(rng.uniform(0.09, 0.2) * static_cast<double>(wh)));
            const auto cx = rng.uniform_int(static_cast<std::int64_t>(half_w),
                                            static_cast<std::int64_t>(ww - 1 - half_w));
            const auto cy = static_cast<std::ptrdiff_t>(horizon) -
                            static_cast<std::ptrdiff_t>(half_h);
            if (k % 2 == 0)
                stamp_rect(world_static, cy, cx, half_h, half_w, cls);
            else
                stamp_ellipse(world_static, cy, cx, half_h, half_w, cls);
        }
    }

    // Mobile objects sit on the ground; each one moves between the views
    // whenever the shift budget allows.
    std::vector<MobileObject> objects;
    for (std::size_t k = 0; k < spec.mobile_object_count && !mobile_ids.empty(); ++k) {
        MobileObject obj;
        obj.cls = mobile_ids[k % mobile_ids.size()];
        if (k % 2 == 0) {
            obj.half_w = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::llround(0.065 * static_cast<double>(ww))));
            obj.half_h = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(0.04 * static_cast<double>(wh))));
        } else {
            obj.half_w = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(0.028 * static_cast<double>(ww))));
            obj.half_h = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::llround(0.075 * static_cast<double>(wh))));
        }
        // Margins keep the object inside every view for any |shift| <= S.
        const auto x_lo = static_cast<std::int64_t>(2 * S + obj.half_w);
        const auto x_hi = static_cast<std::int64_t>(ww) - 1 - x_lo;
        const auto y_lo = std::max(static_cast<std::int64_t>(horizon + obj.half_h),
                                   static_cast<std::int64_t>(2 * S + obj.half_h));
        const auto y_hi = static_cast<std::int64_t>(wh) - 1 -
                          static_cast<std::int64_t>(2 * S + obj.half_h);
        obj.cx = x_lo < x_hi ? rng.uniform_int(x_lo, x_hi) : static_cast<std::int64_t>(ww) / 2;
        obj.cy = y_lo < y_hi ? rng.uniform_int(y_lo, y_hi)
                             : (static_cast<std::int64_t>(horizon + wh)) / 2;
        if (S >= 1) {
            do {
                obj.dx = rng.uniform_int(-static_cast<std::int64_t>(S), static_cast<std::int64_t>(S));
                obj.dy = rng.uniform_int(-static_cast<std::int64_t>(S), static_cast<std::int64_t>(S));
            } while (obj.dx == 0 && obj.dy == 0);
        }
        objects.push_back(obj);
    }

    IntTensor world_src = world_static;
    IntTensor world_tgt = world_static;
    for (const auto& obj : objects) {
        stamp_rect(world_src, obj.cy, obj.cx, obj.half_h, obj.half_w, obj.cls);
        stamp_rect(world_tgt, obj.cy + obj.dy, obj.cx + obj.dx, obj.half_h, obj.half_w, obj.cls);
    }

    // Viewpoint shift between the two captures.
    const std::ptrdiff_t sx =
        S >= 1 ? rng.uniform_int(-static_cast<std::int64_t>(S), static_cast<std::int64_t>(S)) : 0;
    const std::ptrdiff_t sy =
        S >= 1 ? rng.uniform_int(-static_cast<std::int64_t>(S), static_cast<std::int64_t>(S)) : 0;

    const std::uint64_t tex_seed = mix_seed(scene_seed, 0x7e47);
    const Tensor world_src_img = render(world_src, palette, tex_seed);
    const Tensor world_tgt_img = render(world_tgt, palette, tex_seed);

    PairedSample sample;
    sample.source = view_of(world_src_img, S, S, h, w);
    sample.target = view_of(world_tgt_img, static_cast<std::size_t>(S + sy),
                            static_cast<std::size_t>(S + sx), h, w);
    corrupt(sample.target, spec.corruption, spec.corruption_strength, mix_seed(scene_seed, 0xc0));
    sample.source_labels =
        SegmentationMap{view_of(world_src, S, S, h, w), spec.num_classes};
    sample.adverse_labels_heldout =
        SegmentationMap{view_of(world_tgt, static_cast<std::size_t>(S + sy),
                                static_cast<std::size_t>(S + sx), h, w),
                        spec.num_classes};

    // Warp: source pixel (i,j) corresponds to target pixel (i-sy, j-sx). The
    // exact pair (0,0) is the invalid sentinel, so the one genuine sample at
    // the target origin is flagged invalid as a documented limitation.
    sample.warp.values = Tensor({h, w, 2});
    sample.confidence = Tensor({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::ptrdiff_t tx = static_cast<std::ptrdiff_t>(j) - sx;
            const std::ptrdiff_t ty = static_cast<std::ptrdiff_t>(i) - sy;
            const bool in_frame = tx >= 0 && tx < static_cast<std::ptrdiff_t>(w) && ty >= 0 &&
                                  ty < static_cast<std::ptrdiff_t>(h);
            if (in_frame && !(tx == 0 && ty == 0)) {
                sample.warp.values.at(i, j, 0) = static_cast<double>(tx);
                sample.warp.values.at(i, j, 1) = static_cast<double>(ty);
            }
            if (!in_frame) {
                sample.confidence.at(i, j) = 0.05;
            } else {
                // Both views look at world pixel (i+S, j+S); content only
                // mismatches where a mobile object moved in or out.
                const bool match =
                    world_src.at(i + S, j + S) == world_tgt.at(i + S, j + S);
                sample.confidence.at(i, j) = match ? 1.0 : 0.1;
            }
        }
    return sample;
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["format"] = 1;
    j["scene_spec"] = spec.to_json();
    j["count"] = count;
    j["train_fraction"] = train_fraction;
    j["fingerprint"] = fingerprint;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json je;
        je["index"] = e.index;
        je["split"] = e.split;
        je["dir"] = e.dir;
        nlohmann::json cs;
        for (const auto& [file, sum] : e.checksums) cs[file] = sum;
        je["checksums"] = cs;
        samples.push_back(je);
    }
    j["samples"] = samples;
    return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
    Manifest m;
    m.spec = SceneSpec::from_json(j.at("scene_spec"));
    m.count = j.at("count").get<std::size_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.fingerprint = j.at("fingerprint").get<std::string>();
    for (const auto& je : j.at("samples")) {
        ManifestEntry e;
        e.index = je.at("index").get<std::size_t>();
        e.split = je.at("split").get<std::string>();
        e.dir = je.at("dir").get<std::string>();
        for (const auto& [file, sum] : je.at("checksums").items())
            e.checksums.emplace_back(file, sum.get<std::string>());
        m.entries.push_back(std::move(e));
    }
    return m;
}

Manifest write_dataset(const SceneSpec& spec, std::size_t count, double train_fraction,
                       const std::filesystem::path& root) {
    spec.validate();
    check(train_fraction >= 0.0 && train_fraction <= 1.0,
          "write_dataset: train_fraction must be in [0,1]");

    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("write_dataset: cannot create " + root.string());

    Manifest manifest;
    manifest.spec = spec;
    manifest.count = count;
    manifest.train_fraction = train_fraction;
    {
        nlohmann::json fp;
        fp["scene_spec"] = spec.to_json();
        fp["count"] = count;
        fp["train_fraction"] = train_fraction;
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(io::fnv1a64(fp.dump())));
        manifest.fingerprint = buf;
    }

    const std::size_t train_count =
        static_cast<std::size_t>(std::llround(static_cast<double>(count) * train_fraction));
    for (std::size_t i = 0; i < count; ++i) {
        const PairedSample sample = generate_pair(spec, i);
        ManifestEntry e;
        e.index = i;
        e.split = i < train_count ? "train" : "val";
        char dirbuf[32];
        std::snprintf(dirbuf, sizeof(dirbuf), "%s/%05zu", e.split.c_str(), i);
        e.dir = dirbuf;

        const auto dir = root / e.dir;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("write_dataset: cannot create " + dir.string());

        io::write_ppm(dir / "source.ppm", sample.source);
        io::write_ppm(dir / "target.ppm", sample.target);
        io::write_pgm(dir / "labels.pgm", sample.source_labels.labels);
        io::write_pgm(dir / "adverse_labels.pgm", sample.adverse_labels_heldout.labels);
        io::write_f32_planes(dir / "warp.f32", sample.warp.values);
        io::write_f32_planes(dir / "conf.f32", sample.confidence);
        for (const char* file : {"source.ppm", "target.ppm", "labels.pgm", "adverse_labels.pgm",
                                 "warp.f32", "conf.f32"})
            e.checksums.emplace_back(file, io::file_checksum(dir / file));
        manifest.entries.push_back(std::move(e));
    }

    io::write_text_file(root / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

Dataset load_dataset(const std::filesystem::path& root) {
    const auto manifest_path = root / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw IoError("load_dataset: no manifest at " + manifest_path.string());
    nlohmann::json j = nlohmann::json::parse(io::read_text_file(manifest_path), nullptr, false);
    if (j.is_discarded()) throw IoError("load_dataset: corrupt manifest " + manifest_path.string());
    const Manifest manifest = Manifest::from_json(j);

    Dataset ds;
    ds.spec = manifest.spec;
    ds.fingerprint = manifest.fingerprint;
    for (const auto& e : manifest.entries) {
        const auto dir = root / e.dir;
        PairedSample s;
        s.source = io::read_ppm(dir / "source.ppm");
        s.target = io::read_ppm(dir / "target.ppm");
        s.source_labels = SegmentationMap{io::read_pgm(dir / "labels.pgm"), manifest.spec.num_classes};
        s.adverse_labels_heldout =
            SegmentationMap{io::read_pgm(dir / "adverse_labels.pgm"), manifest.spec.num_classes};
        s.warp.values = io::read_f32_planes(dir / "warp.f32");
        s.confidence = io::read_f32_planes(dir / "conf.f32");
        (e.split == "train" ? ds.train : ds.val).push_back(std::move(s));
    }
    return ds;
}

}  // namespace btseg::synth

#include "scmamba/model.hpp"

#include <cstring>
#include <fstream>

namespace scmamba {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

constexpr std::uint32_t kFlagBackwardScan = 1u << 0;
constexpr std::uint32_t kFlagSkip = 1u << 1;
constexpr std::uint32_t kFlagHeadActivation = 1u << 2;
constexpr std::uint32_t kFlagGruBackbone = 1u << 3;
// aggregator occupies bits 8..9

template <class V>
void write_pod(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is, const char* what) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) raise(ErrorKind::format, std::string("checkpoint truncated while reading ") + what);
    return v;
}

}  // namespace

void save_checkpoint(const Model<float>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(ErrorKind::io, "cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    const auto& c = m.cfg;
    write_pod(os, static_cast<std::int32_t>(c.d_in));
    write_pod(os, static_cast<std::int32_t>(c.d_h));
    write_pod(os, static_cast<std::int32_t>(c.d_out));
    write_pod(os, static_cast<std::int32_t>(c.n_blocks));
    write_pod(os, static_cast<std::int32_t>(c.state_size));
    write_pod(os, static_cast<std::int32_t>(c.max_rank));
    std::uint32_t flags = 0;
    if (c.use_backward_scan) flags |= kFlagBackwardScan;
    if (c.use_skip) flags |= kFlagSkip;
    if (c.head_activation) flags |= kFlagHeadActivation;
    if (c.backbone == Backbone::gru) flags |= kFlagGruBackbone;
    flags |= static_cast<std::uint32_t>(c.aggregator) << 8;
    write_pod(os, flags);
    write_pod(os, static_cast<float>(c.dropout));

    auto views = collect_params(const_cast<Model<float>&>(m));
    for (const auto& v : views) {
        os.write(reinterpret_cast<const char*>(v.data),
                 static_cast<std::streamsize>(v.size * sizeof(float)));
    }
    if (!os) raise(ErrorKind::io, "checkpoint write failed: " + path);
}

Model<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(ErrorKind::io, "cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        raise(ErrorKind::format, "corrupt checkpoint: bad magic bytes");
    }
    const auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion) {
        raise(ErrorKind::version,
              "unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig c;
    c.d_in = read_pod<std::int32_t>(is, "d_in");
    c.d_h = read_pod<std::int32_t>(is, "d_h");
    c.d_out = read_pod<std::int32_t>(is, "d_out");
    c.n_blocks = read_pod<std::int32_t>(is, "n_blocks");
    c.state_size = read_pod<std::int32_t>(is, "state_size");
    c.max_rank = read_pod<std::int32_t>(is, "max_rank");
    const auto flags = read_pod<std::uint32_t>(is, "flags");
    c.use_backward_scan = flags & kFlagBackwardScan;
    c.use_skip = flags & kFlagSkip;
    c.head_activation = flags & kFlagHeadActivation;
    c.backbone = (flags & kFlagGruBackbone) ? Backbone::gru : Backbone::ssm;
    c.aggregator = static_cast<Aggregator>((flags >> 8) & 0x3u);
    c.dropout = read_pod<float>(is, "dropout");
    if (c.d_in < 1 || c.d_h < 1 || c.d_out < 1 || c.n_blocks < 1 || c.state_size < 1 ||
        c.max_rank < 0) {
        raise(ErrorKind::format, "corrupt checkpoint: invalid configuration block");
    }

    Model<float> m = model_zeros<float>(c);
    for (auto& v : collect_params(m)) {
        is.read(reinterpret_cast<char*>(v.data),
                static_cast<std::streamsize>(v.size * sizeof(float)));
        if (!is) raise(ErrorKind::format, "corrupt checkpoint: truncated tensor " + v.name);
    }
    is.peek();
    if (!is.eof()) raise(ErrorKind::format, "corrupt checkpoint: trailing bytes");
    return m;
}

}  // namespace scmamba

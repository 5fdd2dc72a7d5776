#include "fedelm/model_io.hpp"

#include <fstream>

#include "fedelm/detail/bytes.hpp"

namespace fedelm {

using detail::put_u16;
using detail::put_u32;
using detail::put_u64;
using detail::put_f64;
using Reader = detail::Reader<SerializationError>;

static void put_block(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& block) {
    put_u32(out, static_cast<std::uint32_t>(block.size()));
    out.insert(out.end(), block.begin(), block.end());
}

static void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

std::vector<std::uint8_t> encode_edge_state(const EdgeState& state) {
    const SlfnModel& model = state.detector.model;
    if (!model.p) {
        throw SerializationError("model has no sequential state (P); train it first");
    }
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'O', 'S', 'M', 'F'});
    put_u16(out, kModelFileVersion);
    put_str(out, state.device_id);
    put_block(out, serialize(extract(model)));
    for (double v : model.beta.storage()) put_f64(out, v);
    for (double v : model.p->storage()) put_f64(out, v);
    put_u32(out, static_cast<std::uint32_t>(state.merged_peers.size()));
    for (const auto& [peer, record] : state.merged_peers) {
        put_str(out, peer);
        put_u64(out, record.timestamp);
        put_block(out, serialize(record.contribution));
    }
    return out;
}

EdgeState decode_edge_state(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    if (r.str(4) != "OSMF") throw SerializationError("bad magic: expected OSMF");
    const std::uint16_t version = r.u16();
    if (version != kModelFileVersion) {
        throw SerializationError("unsupported model file version " + std::to_string(version));
    }
    EdgeState state;
    state.device_id = r.str(r.u16());
    const Intermediates ir = deserialize(r.raw(r.u32()));

    SlfnModel model = init_model(ir.topology);
    const std::size_t nh = ir.topology.n_hidden;
    const std::size_t m = ir.topology.n_output;
    model.beta = Matrix(nh, m);
    for (std::size_t i = 0; i < nh * m; ++i) model.beta.data()[i] = r.f64();
    Matrix p(nh, nh);
    for (std::size_t i = 0; i < nh * nh; ++i) p.data()[i] = r.f64();
    model.p = std::move(p);
    model.trained_rows = ir.sample_count;
    model.accumulated_ridge = ir.accumulated_ridge;
    state.detector = make_detector(model);

    const std::uint32_t n_peers = r.u32();
    for (std::uint32_t i = 0; i < n_peers; ++i) {
        const std::string peer = r.str(r.u16());
        PeerMergeRecord record;
        record.timestamp = r.u64();
        record.contribution = deserialize(r.raw(r.u32()));
        state.merged_peers[peer] = std::move(record);
    }
    if (r.pos != bytes.size()) throw SerializationError("trailing bytes in model file");
    return state;
}

void save_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SerializationError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw SerializationError("write failed: " + path);
}

std::vector<std::uint8_t> load_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SerializationError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void save_edge_state(const EdgeState& state, const std::string& path) {
    save_bytes(encode_edge_state(state), path);
}

EdgeState load_edge_state(const std::string& path) {
    return decode_edge_state(load_bytes(path));
}

}  // namespace fedelm

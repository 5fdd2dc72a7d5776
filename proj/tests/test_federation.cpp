#include "doctest.h"

#include "fedelm/eval.hpp"
#include "fedelm/federation.hpp"
#include "fedelm/model_io.hpp"
#include "test_util.hpp"

using namespace fedelm;
using test::Rng;
using test::random_matrix;

namespace {

Intermediates random_intermediates(Rng& rng, std::uint64_t seed = 7) {
    const Topology topo{5, 3, 5, Activation::Sigmoid, seed};
    SlfnModel m = init_model(topo);
    const Matrix x = random_matrix(rng, 8, 5, 0.0, 1.0);
    m = init_sequential(m, Chunk{x, x}, 1e-6);
    return extract(m);
}

EdgeState make_device(const std::string& id, const Matrix& rows, std::uint64_t seed) {
    const Topology topo{rows.cols(), 4, rows.cols(), Activation::Sigmoid, seed};
    EdgeState state;
    state.device_id = id;
    state.detector = make_detector(train_autoencoder(topo, rows));
    return state;
}

}  // namespace

TEST_CASE("serialize round trip is bit exact") {
    Rng rng(80);
    const Intermediates ir = random_intermediates(rng);
    const auto bytes = serialize(ir);
    const Intermediates back = deserialize(bytes);
    CHECK(back.u.storage() == ir.u.storage());
    CHECK(back.v.storage() == ir.v.storage());
    CHECK(back.topology == ir.topology);
    CHECK(back.sample_count == ir.sample_count);
    CHECK(back.accumulated_ridge == ir.accumulated_ridge);
    CHECK(serialize(back) == bytes);
}

TEST_CASE("payload length follows the declared layout") {
    Rng rng(81);
    const Intermediates ir = random_intermediates(rng);
    const std::size_t nh = ir.topology.n_hidden, m = ir.topology.n_output;
    CHECK(serialize(ir).size() == 4 + 2 + 8 + 12 + 1 + 8 + 8 + 8 * (nh * nh + nh * m));
}

TEST_CASE("truncated payload names expected and actual length") {
    Rng rng(82);
    auto bytes = serialize(random_intermediates(rng));
    const std::size_t full = bytes.size();
    bytes.resize(full - 11);
    CHECK_THROWS_WITH_AS(deserialize(bytes), doctest::Contains(std::to_string(full).c_str()),
                         SerializationError);
}

TEST_CASE("bad magic is rejected") {
    Rng rng(83);
    auto bytes = serialize(random_intermediates(rng));
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize(bytes), SerializationError);
}

TEST_CASE("message envelope round trips") {
    Rng rng(84);
    FederationMessage msg;
    msg.kind = MessageKind::UploadIntermediates;
    msg.device_id = "device-alpha";
    msg.payload = serialize(random_intermediates(rng));
    const FederationMessage back = decode_message(encode_message(msg));
    CHECK(back.kind == msg.kind);
    CHECK(back.device_id == msg.device_id);
    CHECK(back.payload == msg.payload);
    CHECK(!back.error_text.has_value());
}

TEST_CASE("download before upload is an unknown-device error") {
    ServerRegistry reg;
    FederationMessage dl;
    dl.kind = MessageKind::DownloadIntermediates;
    dl.device_id = "ghost";
    const FederationMessage resp = server_handle(reg, dl);
    CHECK(resp.kind == MessageKind::Error);
    CHECK(resp.error_text->find("unknown device") != std::string::npos);
}

TEST_CASE("upload then download relays identical bytes") {
    Rng rng(85);
    ServerRegistry reg;
    FederationMessage up;
    up.kind = MessageKind::UploadIntermediates;
    up.device_id = "dev-a";
    up.payload = serialize(random_intermediates(rng));
    CHECK(server_handle(reg, up).kind == MessageKind::Ack);

    FederationMessage dl;
    dl.kind = MessageKind::DownloadIntermediates;
    dl.device_id = "dev-a";
    const FederationMessage resp = server_handle(reg, dl);
    REQUIRE(resp.payload.has_value());
    CHECK(*resp.payload == *up.payload);
}

TEST_CASE("second upload from the same device wins") {
    Rng rng(86);
    ServerRegistry reg;
    FederationMessage up;
    up.kind = MessageKind::UploadIntermediates;
    up.device_id = "dev-a";
    up.payload = serialize(random_intermediates(rng));
    server_handle(reg, up);
    const auto second = serialize(random_intermediates(rng));
    up.payload = second;
    server_handle(reg, up);

    FederationMessage dl;
    dl.kind = MessageKind::DownloadIntermediates;
    dl.device_id = "dev-a";
    CHECK(*server_handle(reg, dl).payload == second);
}

TEST_CASE("malformed upload leaves the registry unchanged") {
    ServerRegistry reg;
    FederationMessage up;
    up.kind = MessageKind::UploadIntermediates;
    up.device_id = "dev-a";
    up.payload = std::vector<std::uint8_t>{1, 2, 3};
    CHECK(server_handle(reg, up).kind == MessageKind::Error);
    CHECK(reg.entries.empty());
}

TEST_CASE("list available reports ids and timestamps") {
    Rng rng(87);
    ServerRegistry reg;
    for (const char* id : {"dev-a", "dev-b"}) {
        FederationMessage up;
        up.kind = MessageKind::UploadIntermediates;
        up.device_id = id;
        up.payload = serialize(random_intermediates(rng));
        server_handle(reg, up);
    }
    FederationMessage ls;
    ls.kind = MessageKind::ListAvailable;
    const FederationMessage resp = server_handle(reg, ls);
    REQUIRE(resp.payload.has_value());
    const std::string listing(resp.payload->begin(), resp.payload->end());
    CHECK(listing == "dev-a\t1\ndev-b\t2\n");
}

TEST_CASE("edge_round with zero peers is an extract/rebuild round trip") {
    Rng rng(88);
    ServerRegistry reg;
    InProcessTransport transport(reg);
    EdgeState dev = make_device("dev-a", random_matrix(rng, 20, 6, 0.0, 1.0), 99);
    const Matrix beta_before = dev.detector.model.beta;
    const RoundReport report = edge_round(dev, {}, transport);
    CHECK(report.merged.empty());
    CHECK(relative_frobenius_diff(beta_before, dev.detector.model.beta) < 1e-9);
}

TEST_CASE("mutual edge_round equals batch training on the union") {
    Rng rng(89);
    const Matrix rows_a = random_matrix(rng, 18, 6, 0.0, 1.0);
    const Matrix rows_b = random_matrix(rng, 22, 6, 0.0, 1.0);
    ServerRegistry reg;
    InProcessTransport transport(reg);
    EdgeState a = make_device("dev-a", rows_a, 123);
    EdgeState b = make_device("dev-b", rows_b, 123);

    // Publish A, then each side merges the other's pre-merge upload
    // (every round uploads the device's own contribution before merging).
    edge_round(a, {}, transport);
    RoundReport rb = edge_round(b, {"dev-a"}, transport);
    RoundReport ra = edge_round(a, {"dev-b"}, transport);
    CHECK(rb.merged == std::vector<std::string>{"dev-a"});
    CHECK(ra.merged == std::vector<std::string>{"dev-b"});

    // Both devices now hold the union model.
    CHECK(relative_frobenius_diff(a.detector.model.beta, b.detector.model.beta) < 1e-9);

    Matrix all(rows_a.rows() + rows_b.rows(), 6);
    for (std::size_t i = 0; i < rows_a.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j) all(i, j) = rows_a(i, j);
    for (std::size_t i = 0; i < rows_b.rows(); ++i)
        for (std::size_t j = 0; j < 6; ++j) all(rows_a.rows() + i, j) = rows_b(i, j);
    const Topology topo{6, 4, 6, Activation::Sigmoid, 123};
    const SlfnModel batch = train_batch(init_model(topo), Chunk{all, all}, 2e-6);
    CHECK(relative_frobenius_diff(batch.beta, a.detector.model.beta) < 1e-6);
    (void)ra;
}

TEST_CASE("repeat rounds do not double count a stale peer upload") {
    Rng rng(90);
    ServerRegistry reg;
    InProcessTransport transport(reg);
    EdgeState a = make_device("dev-a", random_matrix(rng, 15, 6, 0.0, 1.0), 7);
    EdgeState b = make_device("dev-b", random_matrix(rng, 15, 6, 0.0, 1.0), 7);

    edge_round(b, {}, transport);  // publish B
    edge_round(a, {"dev-b"}, transport);
    const Matrix beta_after_first = a.detector.model.beta;
    const RoundReport second = edge_round(a, {"dev-b"}, transport);
    CHECK(second.merged.empty());
    REQUIRE(second.skipped.size() == 1);
    CHECK(second.skipped[0].second.find("already merged") != std::string::npos);
    CHECK(relative_frobenius_diff(beta_after_first, a.detector.model.beta) < 1e-9);
}

TEST_CASE("peer with a different seed is skipped and reported") {
    Rng rng(91);
    ServerRegistry reg;
    InProcessTransport transport(reg);
    EdgeState a = make_device("dev-a", random_matrix(rng, 15, 6, 0.0, 1.0), 1);
    EdgeState b = make_device("dev-b", random_matrix(rng, 15, 6, 0.0, 1.0), 2);
    edge_round(b, {}, transport);
    const Matrix beta_before = a.detector.model.beta;
    const RoundReport report = edge_round(a, {"dev-b"}, transport);
    CHECK(report.merged.empty());
    REQUIRE(report.skipped.size() == 1);
    CHECK(report.skipped[0].first == "dev-b");
    CHECK(report.skipped[0].second.find("seed") != std::string::npos);
    CHECK(relative_frobenius_diff(beta_before, a.detector.model.beta) < 1e-9);
}

TEST_CASE("socket transport matches in-process behavior bit for bit") {
    Rng rng(92);
    TcpServer server(0);
    const std::uint16_t port = server.start();
    TcpTransport transport("127.0.0.1", port);

    for (int i = 0; i < 20; ++i) {
        const Intermediates ir = random_intermediates(rng, 7 + i);
        FederationMessage up;
        up.kind = MessageKind::UploadIntermediates;
        up.device_id = "dev-" + std::to_string(i);
        up.payload = serialize(ir);
        CHECK(transport.request(up).kind == MessageKind::Ack);

        FederationMessage dl;
        dl.kind = MessageKind::DownloadIntermediates;
        dl.device_id = up.device_id;
        const FederationMessage resp = transport.request(dl);
        REQUIRE(resp.payload.has_value());
        CHECK(*resp.payload == *up.payload);
    }
    server.stop();
}

TEST_CASE("edge rounds work across the socket transport") {
    Rng rng(93);
    TcpServer server(0);
    const std::uint16_t port = server.start();
    TcpTransport transport("127.0.0.1", port);

    EdgeState a = make_device("dev-a", random_matrix(rng, 16, 6, 0.0, 1.0), 55);
    EdgeState b = make_device("dev-b", random_matrix(rng, 16, 6, 0.0, 1.0), 55);
    edge_round(a, {}, transport);
    edge_round(b, {"dev-a"}, transport);
    edge_round(a, {"dev-b"}, transport);
    // A merged B's pre-merge upload; B merged A's. Both hold the union.
    CHECK(relative_frobenius_diff(a.detector.model.beta, b.detector.model.beta) < 1e-6);
    server.stop();
}

TEST_CASE("edge state file round trips the merge ledger") {
    Rng rng(94);
    ServerRegistry reg;
    InProcessTransport transport(reg);
    EdgeState a = make_device("dev-a", random_matrix(rng, 15, 6, 0.0, 1.0), 3);
    EdgeState b = make_device("dev-b", random_matrix(rng, 15, 6, 0.0, 1.0), 3);
    edge_round(b, {}, transport);
    edge_round(a, {"dev-b"}, transport);

    const EdgeState back = decode_edge_state(encode_edge_state(a));
    CHECK(back.device_id == "dev-a");
    CHECK(back.detector.model.beta.storage() == a.detector.model.beta.storage());
    CHECK(back.detector.model.p->storage() == a.detector.model.p->storage());
    REQUIRE(back.merged_peers.count("dev-b") == 1);
    CHECK(back.merged_peers.at("dev-b").timestamp == a.merged_peers.at("dev-b").timestamp);
}

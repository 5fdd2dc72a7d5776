#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fedelm/anomaly.hpp"
#include "fedelm/merge.hpp"

namespace fedelm {

class SerializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Intermediates wire format (.osuv):
//   magic "OSUV" | version u16 | seed u64 | n u32 | n_hidden u32 | m u32 |
//   activation u8 | accumulated_ridge f64 | sample_count u64 |
//   U row-major f64[n_hidden^2] | V row-major f64[n_hidden*m]
// All integers and floats little-endian.

inline constexpr std::uint16_t kOsuvVersion = 1;

std::vector<std::uint8_t> serialize(const Intermediates& ir);
Intermediates deserialize(const std::vector<std::uint8_t>& bytes);

std::size_t expected_payload_size(const Topology& t);

// ---------------------------------------------------------------------------
// Message envelope

enum class MessageKind : std::uint8_t {
    Register = 0,
    UploadIntermediates = 1,
    ListAvailable = 2,
    DownloadIntermediates = 3,
    Ack = 4,
    Error = 5,
};

struct FederationMessage {
    MessageKind kind = MessageKind::Ack;
    std::string device_id;
    std::optional<std::vector<std::uint8_t>> payload;
    std::optional<std::string> error_text;
};

// Envelope layout: kind u8, presence flags u8 (bit0 payload, bit1 error),
// device_id (u16 length + UTF-8), payload (u32 length + bytes) if present,
// error_text (u16 length + UTF-8) if present.
std::vector<std::uint8_t> encode_message(const FederationMessage& msg);
FederationMessage decode_message(const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Aggregation server state

struct RegistryEntry {
    std::vector<std::uint8_t> payload;
    std::uint64_t timestamp = 0;  // logical upload clock, monotonic
    std::uint64_t seed = 0;
};

struct ServerRegistry {
    std::map<std::string, RegistryEntry> entries;
    std::set<std::string> registered;
    std::uint64_t clock = 0;
};

// Handles one message, mutating the registry atomically and returning the
// response. Malformed uploads leave the registry unchanged.
FederationMessage server_handle(ServerRegistry& state, const FederationMessage& msg);

// ---------------------------------------------------------------------------
// Transports

class Transport {
public:
    virtual ~Transport() = default;
    virtual FederationMessage request(const FederationMessage& msg) = 0;
};

// Deterministic loopback used by tests and experiments. Requests still go
// through encode/decode so the byte path is exercised.
class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(ServerRegistry& registry) : registry_(registry) {}
    FederationMessage request(const FederationMessage& msg) override;

private:
    ServerRegistry& registry_;
    std::mutex mutex_;
};

// Length-prefixed messages over a TCP stream: u32 length + encoded message.
class TcpTransport final : public Transport {
public:
    TcpTransport(std::string host, std::uint16_t port)
        : host_(std::move(host)), port_(port) {}
    FederationMessage request(const FederationMessage& msg) override;

private:
    std::string host_;
    std::uint16_t port_;
};

class TcpServer {
public:
    explicit TcpServer(std::uint16_t port) : port_(port) {}
    ~TcpServer();

    // Binds and starts the accept loop; throws TransportError if the port
    // is taken. Returns the bound port (useful with port 0).
    std::uint16_t start();
    void stop();

    ServerRegistry& registry() { return registry_; }
    std::uint16_t port() const { return port_; }

    // Optional hook invoked (under the registry lock) for each handled
    // message; the CLI uses it for logging.
    std::function<void(const FederationMessage&)> on_message;

private:
    void accept_loop();
    void serve_connection(int fd);

    std::uint16_t port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    ServerRegistry registry_;
};

// ---------------------------------------------------------------------------
// Edge client round

struct PeerMergeRecord {
    std::uint64_t timestamp = 0;
    Intermediates contribution;
};

// A device's federated state: the detector plus, per peer, the last
// contribution already folded into the model. Re-merging a peer first
// subtracts the stale contribution so nothing is double counted.
struct EdgeState {
    std::string device_id;
    AnomalyDetector detector;
    std::map<std::string, PeerMergeRecord> merged_peers;
};

struct RoundReport {
    std::vector<std::string> merged;
    std::vector<std::pair<std::string, std::string>> skipped;  // peer id, reason
};

// Executes one cooperative update round: extract and upload own
// intermediates, download each peer's, subtract any stale contribution,
// combine and rebuild. The detector keeps its threshold configuration.
RoundReport edge_round(EdgeState& state, const std::vector<std::string>& peer_ids,
                       Transport& transport);

}  // namespace fedelm

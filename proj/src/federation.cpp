#include "fedelm/federation.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

#include "fedelm/detail/bytes.hpp"

namespace fedelm {

using detail::put_f64;
using detail::put_u16;
using detail::put_u32;
using detail::put_u64;
using detail::put_u8;
using Reader = detail::Reader<SerializationError>;

// ---------------------------------------------------------------------------
// Intermediates serialization

static constexpr char kMagic[4] = {'O', 'S', 'U', 'V'};

std::size_t expected_payload_size(const Topology& t) {
    return 4 + 2 + 8 + 12 + 1 + 8 + 8 +
           8 * (t.n_hidden * t.n_hidden + t.n_hidden * t.n_output);
}

std::vector<std::uint8_t> serialize(const Intermediates& ir) {
    std::vector<std::uint8_t> out;
    out.reserve(expected_payload_size(ir.topology));
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kOsuvVersion);
    put_u64(out, ir.topology.init_seed);
    put_u32(out, static_cast<std::uint32_t>(ir.topology.n_input));
    put_u32(out, static_cast<std::uint32_t>(ir.topology.n_hidden));
    put_u32(out, static_cast<std::uint32_t>(ir.topology.n_output));
    put_u8(out, static_cast<std::uint8_t>(ir.topology.activation));
    put_f64(out, ir.accumulated_ridge);
    put_u64(out, ir.sample_count);
    for (double v : ir.u.storage()) put_f64(out, v);
    for (double v : ir.v.storage()) put_f64(out, v);
    return out;
}

Intermediates deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    const std::string magic = r.str(4);
    if (magic != "OSUV") throw SerializationError("bad magic: expected OSUV");
    const std::uint16_t version = r.u16();
    if (version != kOsuvVersion) {
        throw SerializationError("unsupported format version " + std::to_string(version));
    }
    Intermediates ir;
    ir.topology.init_seed = r.u64();
    ir.topology.n_input = r.u32();
    ir.topology.n_hidden = r.u32();
    ir.topology.n_output = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 2) throw SerializationError("unknown activation tag " + std::to_string(act));
    ir.topology.activation = static_cast<Activation>(act);
    ir.accumulated_ridge = r.f64();
    ir.sample_count = r.u64();

    const std::size_t expected = expected_payload_size(ir.topology);
    if (bytes.size() != expected) {
        throw SerializationError("payload length mismatch: expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(bytes.size()));
    }
    const std::size_t nh = ir.topology.n_hidden;
    const std::size_t m = ir.topology.n_output;
    ir.u = Matrix(nh, nh);
    for (std::size_t i = 0; i < nh * nh; ++i) ir.u.data()[i] = r.f64();
    ir.v = Matrix(nh, m);
    for (std::size_t i = 0; i < nh * m; ++i) ir.v.data()[i] = r.f64();
    if (!ir.u.all_finite() || !ir.v.all_finite()) {
        throw SerializationError("payload contains non-finite values");
    }
    return ir;
}

// ---------------------------------------------------------------------------
// Message envelope

std::vector<std::uint8_t> encode_message(const FederationMessage& msg) {
    std::vector<std::uint8_t> out;
    put_u8(out, static_cast<std::uint8_t>(msg.kind));
    std::uint8_t flags = 0;
    if (msg.payload) flags |= 1;
    if (msg.error_text) flags |= 2;
    put_u8(out, flags);
    put_u16(out, static_cast<std::uint16_t>(msg.device_id.size()));
    out.insert(out.end(), msg.device_id.begin(), msg.device_id.end());
    if (msg.payload) {
        put_u32(out, static_cast<std::uint32_t>(msg.payload->size()));
        out.insert(out.end(), msg.payload->begin(), msg.payload->end());
    }
    if (msg.error_text) {
        put_u16(out, static_cast<std::uint16_t>(msg.error_text->size()));
        out.insert(out.end(), msg.error_text->begin(), msg.error_text->end());
    }
    return out;
}

FederationMessage decode_message(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    FederationMessage msg;
    const std::uint8_t kind = r.u8();
    if (kind > 5) throw SerializationError("unknown message kind " + std::to_string(kind));
    msg.kind = static_cast<MessageKind>(kind);
    const std::uint8_t flags = r.u8();
    msg.device_id = r.str(r.u16());
    if (flags & 1) msg.payload = r.raw(r.u32());
    if (flags & 2) msg.error_text = r.str(r.u16());
    if (r.pos != bytes.size()) throw SerializationError("trailing bytes in message");
    return msg;
}

// ---------------------------------------------------------------------------
// Server

static FederationMessage make_error(const std::string& text) {
    FederationMessage m;
    m.kind = MessageKind::Error;
    m.error_text = text;
    return m;
}

FederationMessage server_handle(ServerRegistry& state, const FederationMessage& msg) {
    FederationMessage resp;
    switch (msg.kind) {
        case MessageKind::Register:
            state.registered.insert(msg.device_id);
            resp.kind = MessageKind::Ack;
            resp.device_id = msg.device_id;
            return resp;

        case MessageKind::UploadIntermediates: {
            if (!msg.payload) return make_error("upload without payload");
            std::uint64_t seed = 0;
            try {
                seed = deserialize(*msg.payload).topology.init_seed;
            } catch (const std::exception& e) {
                return make_error(std::string("invalid payload: ") + e.what());
            }
            RegistryEntry entry;
            entry.payload = *msg.payload;
            entry.timestamp = ++state.clock;
            entry.seed = seed;
            state.entries[msg.device_id] = std::move(entry);  // newest wins
            resp.kind = MessageKind::Ack;
            resp.device_id = msg.device_id;
            return resp;
        }

        case MessageKind::ListAvailable: {
            std::ostringstream os;
            for (const auto& [id, entry] : state.entries) {
                os << id << '\t' << entry.timestamp << '\n';
            }
            const std::string listing = os.str();
            resp.kind = MessageKind::Ack;
            resp.device_id = msg.device_id;
            resp.payload = std::vector<std::uint8_t>(listing.begin(), listing.end());
            return resp;
        }

        case MessageKind::DownloadIntermediates: {
            auto it = state.entries.find(msg.device_id);
            if (it == state.entries.end()) {
                return make_error("unknown device: " + msg.device_id);
            }
            resp.kind = MessageKind::DownloadIntermediates;
            resp.device_id = msg.device_id;
            resp.payload = it->second.payload;
            return resp;
        }

        case MessageKind::Ack:
        case MessageKind::Error:
            return make_error("unexpected message kind");
    }
    return make_error("unhandled message kind");
}

// ---------------------------------------------------------------------------
// In-process transport

FederationMessage InProcessTransport::request(const FederationMessage& msg) {
    // Round-trip through the byte encoding so this path is equivalent to
    // the socket path for test purposes.
    const FederationMessage decoded = decode_message(encode_message(msg));
    std::vector<std::uint8_t> resp_bytes;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        resp_bytes = encode_message(server_handle(registry_, decoded));
    }
    return decode_message(resp_bytes);
}

// ---------------------------------------------------------------------------
// TCP framing

static void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        const ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n <= 0) throw TransportError("socket write failed");
        off += static_cast<std::size_t>(n);
    }
}

static bool read_all(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        const ssize_t n = ::recv(fd, data + off, len - off, 0);
        if (n == 0) return false;  // peer closed
        if (n < 0) throw TransportError("socket read failed");
        off += static_cast<std::size_t>(n);
    }
    return true;
}

static void write_frame(int fd, const std::vector<std::uint8_t>& bytes) {
    std::vector<std::uint8_t> header;
    put_u32(header, static_cast<std::uint32_t>(bytes.size()));
    write_all(fd, header.data(), header.size());
    write_all(fd, bytes.data(), bytes.size());
}

static constexpr std::size_t kMaxFrame = 1u << 30;

static bool read_frame(int fd, std::vector<std::uint8_t>& out) {
    std::uint8_t header[4];
    if (!read_all(fd, header, 4)) return false;
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | header[i];
    if (len > kMaxFrame) throw TransportError("frame too large");
    out.resize(len);
    if (len > 0 && !read_all(fd, out.data(), len)) {
        throw TransportError("connection closed mid-frame");
    }
    return true;
}

FederationMessage TcpTransport::request(const FederationMessage& msg) {
    struct addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    struct addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port_);
    if (::getaddrinfo(host_.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
        throw TransportError("cannot resolve " + host_);
    }
    int fd = -1;
    for (struct addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + host_ + ":" + port_str);
    try {
        write_frame(fd, encode_message(msg));
        std::vector<std::uint8_t> resp_bytes;
        if (!read_frame(fd, resp_bytes)) throw TransportError("server closed connection");
        ::close(fd);
        return decode_message(resp_bytes);
    } catch (...) {
        ::close(fd);
        throw;
    }
}

// ---------------------------------------------------------------------------
// TCP server

TcpServer::~TcpServer() { stop(); }

std::uint16_t TcpServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportError("cannot create socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw TransportError("cannot bind port " + std::to_string(port_));
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw TransportError("listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
}

void TcpServer::stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    for (auto& t : workers_) {
        if (t.joinable()) t.join();
    }
    workers_.clear();
}

void TcpServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        std::lock_guard<std::mutex> lock(mutex_);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TcpServer::serve_connection(int fd) {
    try {
        std::vector<std::uint8_t> frame;
        while (running_ && read_frame(fd, frame)) {
            FederationMessage resp;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                FederationMessage msg;
                try {
                    msg = decode_message(frame);
                } catch (const std::exception&) {
                    break;  // malformed bytes: drop this connection
                }
                if (on_message) on_message(msg);
                resp = server_handle(registry_, msg);
            }
            write_frame(fd, encode_message(resp));
        }
    } catch (const std::exception&) {
        // connection-level failure only affects this client
    }
    ::close(fd);
}

// ---------------------------------------------------------------------------
// Edge round

static std::map<std::string, std::uint64_t> parse_listing(const std::vector<std::uint8_t>& payload) {
    std::map<std::string, std::uint64_t> out;
    std::istringstream is(std::string(payload.begin(), payload.end()));
    std::string line;
    while (std::getline(is, line)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        out[line.substr(0, tab)] = std::stoull(line.substr(tab + 1));
    }
    return out;
}

RoundReport edge_round(EdgeState& state, const std::vector<std::string>& peer_ids,
                       Transport& transport) {
    RoundReport report;
    const Intermediates own = extract(state.detector.model);

    FederationMessage upload;
    upload.kind = MessageKind::UploadIntermediates;
    upload.device_id = state.device_id;
    upload.payload = serialize(own);
    FederationMessage up_resp = transport.request(upload);
    if (up_resp.kind != MessageKind::Ack) {
        throw TransportError("upload rejected: " + up_resp.error_text.value_or("unknown error"));
    }

    FederationMessage list;
    list.kind = MessageKind::ListAvailable;
    list.device_id = state.device_id;
    const FederationMessage list_resp = transport.request(list);
    const auto timestamps = list_resp.payload ? parse_listing(*list_resp.payload)
                                              : std::map<std::string, std::uint64_t>{};

    Intermediates total = own;
    std::map<std::string, PeerMergeRecord> new_records = state.merged_peers;

    for (const std::string& peer : peer_ids) {
        if (peer == state.device_id) continue;
        FederationMessage dl;
        dl.kind = MessageKind::DownloadIntermediates;
        dl.device_id = peer;
        FederationMessage resp;
        try {
            resp = transport.request(dl);
        } catch (const TransportError& e) {
            report.skipped.emplace_back(peer, std::string("transport failure: ") + e.what());
            continue;
        }
        if (resp.kind == MessageKind::Error || !resp.payload) {
            report.skipped.emplace_back(peer, resp.error_text.value_or("no payload"));
            continue;
        }
        Intermediates theirs;
        try {
            theirs = deserialize(*resp.payload);
        } catch (const std::exception& e) {
            report.skipped.emplace_back(peer, std::string("bad payload: ") + e.what());
            continue;
        }
        const auto ts_it = timestamps.find(peer);
        const std::uint64_t ts = ts_it != timestamps.end() ? ts_it->second : 0;

        const auto prev = state.merged_peers.find(peer);
        if (prev != state.merged_peers.end() && prev->second.timestamp == ts) {
            report.skipped.emplace_back(peer, "already merged this upload (equal timestamp)");
            continue;
        }
        try {
            if (prev != state.merged_peers.end()) {
                total = subtract(total, prev->second.contribution);
            }
            total = combine(total, theirs);
        } catch (const IncompatibilityError& e) {
            report.skipped.emplace_back(peer, e.what());
            continue;
        }
        new_records[peer] = PeerMergeRecord{ts, theirs};
        report.merged.push_back(peer);
    }

    SlfnModel rebuilt = rebuild(total);
    state.detector.model = std::move(rebuilt);
    state.merged_peers = std::move(new_records);
    return report;
}

}  // namespace fedelm

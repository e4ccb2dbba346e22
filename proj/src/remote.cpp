#include "kbist/remote.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <utility>

namespace kbist {

namespace {

constexpr std::uint8_t kTypeRequest = 1;
constexpr std::uint8_t kTypeResponse = 2;
constexpr std::uint8_t kTypeDiag = 3;
constexpr std::uint8_t kTypeError = 4;
constexpr std::size_t kHeaderSize = 10;
constexpr char kMagic[4] = {'K', 'B', 'S', 'T'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    if (s.size() > 0xFFFF)
        throw ProtocolError(ProtocolError::Kind::Overflow, "string field exceeds 65535 octets");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
    }
    std::uint32_t u32() {
        auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) << 24 | static_cast<std::uint32_t>(b[1]) << 16 |
               static_cast<std::uint32_t>(b[2]) << 8 | static_cast<std::uint32_t>(b[3]);
    }
    std::string string() {
        std::uint16_t n = u16();
        auto b = take(n);
        return std::string(reinterpret_cast<const char*>(b.data()), b.size());
    }
    std::vector<std::uint8_t> octets(std::size_t n) {
        auto b = take(n);
        return std::vector<std::uint8_t>(b.begin(), b.end());
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const std::uint8_t> take(std::size_t n) {
        if (data_.size() - pos_ < n)
            throw ProtocolError(ProtocolError::Kind::BadPayload, "payload field truncated");
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::uint8_t type_of(const ProtocolMessage& msg) {
    switch (msg.index()) {
        case 0: return kTypeRequest;
        case 1: return kTypeResponse;
        case 2: return kTypeDiag;
        default: return kTypeError;
    }
}

std::vector<std::uint8_t> encode_payload(const ProtocolMessage& msg) {
    std::vector<std::uint8_t> p;
    if (const auto* req = std::get_if<TestRequest>(&msg)) {
        put_string(p, req->dut_id);
        put_u32(p, req->seed);
        put_u32(p, req->pattern_count);
        put_u16(p, req->digest_bits);
    } else if (const auto* resp = std::get_if<TestResponse>(&msg)) {
        if (resp->signature.size() > 0xFFFF)
            throw ProtocolError(ProtocolError::Kind::Overflow, "signature exceeds 65535 octets");
        put_u16(p, static_cast<std::uint16_t>(resp->signature.size()));
        p.insert(p.end(), resp->signature.begin(), resp->signature.end());
    } else if (const auto* diag = std::get_if<DiagResult>(&msg)) {
        p.push_back(static_cast<std::uint8_t>(diag->verdict));
        if (diag->fault_ids.size() > 0xFFFF)
            throw ProtocolError(ProtocolError::Kind::Overflow, "too many fault ids");
        put_u16(p, static_cast<std::uint16_t>(diag->fault_ids.size()));
        for (const std::string& id : diag->fault_ids) put_string(p, id);
    } else {
        const auto& err = std::get<ErrorMessage>(msg);
        put_u16(p, err.code);
        put_string(p, err.detail);
    }
    return p;
}

ProtocolMessage decode_payload(std::uint8_t type, std::span<const std::uint8_t> payload) {
    Reader r(payload);
    ProtocolMessage msg;
    switch (type) {
        case kTypeRequest: {
            TestRequest req;
            req.dut_id = r.string();
            req.seed = r.u32();
            req.pattern_count = r.u32();
            req.digest_bits = r.u16();
            msg = std::move(req);
            break;
        }
        case kTypeResponse: {
            TestResponse resp;
            std::uint16_t n = r.u16();
            resp.signature = r.octets(n);
            msg = std::move(resp);
            break;
        }
        case kTypeDiag: {
            DiagResult diag;
            std::uint8_t v = r.u8();
            if (v > 2)
                throw ProtocolError(ProtocolError::Kind::BadPayload,
                                    "unknown verdict " + std::to_string(v));
            diag.verdict = static_cast<Verdict>(v);
            std::uint16_t n = r.u16();
            for (std::uint16_t i = 0; i < n; ++i) diag.fault_ids.push_back(r.string());
            msg = std::move(diag);
            break;
        }
        case kTypeError: {
            ErrorMessage err;
            err.code = r.u16();
            err.detail = r.string();
            msg = std::move(err);
            break;
        }
        default:
            throw ProtocolError(ProtocolError::Kind::BadType,
                                "unknown message type " + std::to_string(type));
    }
    if (!r.done())
        throw ProtocolError(ProtocolError::Kind::BadPayload, "trailing octets in payload");
    return msg;
}

void check_header(std::span<const std::uint8_t> h) {
    if (std::memcmp(h.data(), kMagic, 4) != 0)
        throw ProtocolError(ProtocolError::Kind::BadMagic, "bad frame magic");
    if (h[4] != kProtocolVersion)
        throw ProtocolError(ProtocolError::Kind::BadVersion,
                            "unsupported protocol version " + std::to_string(h[4]));
}

std::uint32_t header_payload_length(std::span<const std::uint8_t> h) {
    std::uint32_t n = static_cast<std::uint32_t>(h[6]) << 24 |
                      static_cast<std::uint32_t>(h[7]) << 16 |
                      static_cast<std::uint32_t>(h[8]) << 8 | static_cast<std::uint32_t>(h[9]);
    if (n > kMaxPayload)
        throw ProtocolError(ProtocolError::Kind::Overflow,
                            "payload length " + std::to_string(n) + " exceeds limit");
    return n;
}

// Returns false at clean EOF before the first octet.
bool read_exact(ByteStream& stream, std::span<std::uint8_t> buf, bool eof_ok) {
    std::size_t got = 0;
    while (got < buf.size()) {
        std::size_t n = stream.read_some(buf.subspan(got));
        if (n == 0) {
            if (got == 0 && eof_ok) return false;
            throw ProtocolError(ProtocolError::Kind::Truncated, "connection closed mid-frame");
        }
        got += n;
    }
    return true;
}

int connect_fd(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw ProtocolError(ProtocolError::Kind::Transport,
                            "resolve " + host + ": " + gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
        throw ProtocolError(ProtocolError::Kind::Transport,
                            "cannot connect to " + host + ":" + port);
    return fd;
}

std::pair<std::string, std::string> split_host_port(const std::string& host_port) {
    std::size_t colon = host_port.rfind(':');
    if (colon == std::string::npos || colon + 1 == host_port.size())
        throw ProtocolError(ProtocolError::Kind::Transport,
                            "expected host:port, got " + host_port);
    return {host_port.substr(0, colon), host_port.substr(colon + 1)};
}

}  // namespace

std::vector<std::uint8_t> encode(const ProtocolMessage& msg) {
    std::vector<std::uint8_t> payload = encode_payload(msg);
    if (payload.size() > kMaxPayload)
        throw ProtocolError(ProtocolError::Kind::Overflow, "payload exceeds 16 MiB limit");
    std::vector<std::uint8_t> frame;
    frame.reserve(kHeaderSize + payload.size());
    frame.insert(frame.end(), kMagic, kMagic + 4);
    frame.push_back(kProtocolVersion);
    frame.push_back(type_of(msg));
    put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

ProtocolMessage decode(std::span<const std::uint8_t> frame) {
    if (frame.size() < kHeaderSize)
        throw ProtocolError(ProtocolError::Kind::Truncated, "frame shorter than header");
    check_header(frame.first(kHeaderSize));
    std::uint32_t len = header_payload_length(frame.first(kHeaderSize));
    if (frame.size() - kHeaderSize < len)
        throw ProtocolError(ProtocolError::Kind::Truncated, "frame payload truncated");
    if (frame.size() - kHeaderSize > len)
        throw ProtocolError(ProtocolError::Kind::BadPayload, "trailing octets after frame");
    return decode_payload(frame[5], frame.subspan(kHeaderSize, len));
}

void write_frame(ByteStream& stream, const ProtocolMessage& msg) {
    stream.write_all(encode(msg));
}

std::optional<ProtocolMessage> read_frame(ByteStream& stream) {
    std::uint8_t header[kHeaderSize];
    if (!read_exact(stream, header, true)) return std::nullopt;
    check_header(header);
    std::uint32_t len = header_payload_length(header);
    std::vector<std::uint8_t> payload(len);
    if (len > 0) read_exact(stream, payload, false);
    return decode_payload(header[5], payload);
}

TcpStream::TcpStream(int fd) : fd_(fd) {}

TcpStream::~TcpStream() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& host_port) {
    auto [host, port] = split_host_port(host_port);
    return std::make_unique<TcpStream>(connect_fd(host, port));
}

void TcpStream::set_read_timeout(std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = timeout.count() / 1000;
    tv.tv_usec = (timeout.count() % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

std::size_t TcpStream::read_some(std::span<std::uint8_t> buf) {
    while (true) {
        ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK)
            throw ProtocolError(ProtocolError::Kind::Timeout, "read timed out");
        throw ProtocolError(ProtocolError::Kind::Transport,
                            std::string("recv: ") + std::strerror(errno));
    }
}

void TcpStream::write_all(std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(ProtocolError::Kind::Transport,
                                std::string("send: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

void TcpStream::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpListener::TcpListener(const std::string& host_port) {
    auto [host, port] = split_host_port(host_port);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw ProtocolError(ProtocolError::Kind::Transport,
                            "resolve " + host + ": " + gai_strerror(rc));
    fd_ = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd_ < 0) continue;
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(fd_, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd_, 16) == 0) break;
        ::close(fd_);
        fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0)
        throw ProtocolError(ProtocolError::Kind::Transport, "cannot listen on " + host_port);

    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
        if (addr.ss_family == AF_INET)
            port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
        else if (addr.ss_family == AF_INET6)
            port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
    }
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpListener::accept() {
    while (true) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) return std::make_unique<TcpStream>(fd);
        if (errno == EINTR) continue;
        return nullptr;  // listener shut down or hard error; serve loop exits
    }
}

void TcpListener::close() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::size_t RecordingStream::read_some(std::span<std::uint8_t> buf) {
    std::size_t n = inner_.read_some(buf);
    inbound_.insert(inbound_.end(), buf.begin(), buf.begin() + n);
    return n;
}

void RecordingStream::write_all(std::span<const std::uint8_t> data) {
    inner_.write_all(data);
    outbound_.insert(outbound_.end(), data.begin(), data.end());
}

namespace {

struct Pipe {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::uint8_t> data;
    bool closed = false;
};

class DuplexEnd : public ByteStream {
public:
    DuplexEnd(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
        : in_(std::move(in)), out_(std::move(out)) {}

    ~DuplexEnd() override {
        for (const auto& pipe : {in_, out_}) {
            std::lock_guard lock(pipe->mutex);
            pipe->closed = true;
            pipe->cv.notify_all();
        }
    }

    std::size_t read_some(std::span<std::uint8_t> buf) override {
        std::unique_lock lock(in_->mutex);
        in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
        if (in_->data.empty()) return 0;
        std::size_t n = std::min(buf.size(), in_->data.size());
        for (std::size_t i = 0; i < n; ++i) {
            buf[i] = in_->data.front();
            in_->data.pop_front();
        }
        return n;
    }

    void write_all(std::span<const std::uint8_t> data) override {
        std::lock_guard lock(out_->mutex);
        if (out_->closed)
            throw ProtocolError(ProtocolError::Kind::Transport, "peer closed");
        out_->data.insert(out_->data.end(), data.begin(), data.end());
        out_->cv.notify_all();
    }

private:
    std::shared_ptr<Pipe> in_;
    std::shared_ptr<Pipe> out_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_duplex_pair() {
    auto a = std::make_shared<Pipe>();
    auto b = std::make_shared<Pipe>();
    return {std::make_unique<DuplexEnd>(a, b), std::make_unique<DuplexEnd>(b, a)};
}

TesterServer::TesterServer(FaultDictionary dict, TesterOptions options)
    : dict_(std::move(dict)), options_(std::move(options)) {
    std::vector<DictionaryKey> keys = dict_.keys();
    if (keys.empty())
        throw std::invalid_argument("tester needs a dictionary with at least one session key");
    if (options_.seed_order.empty()) {
        session_keys_ = std::move(keys);
    } else {
        for (std::uint32_t seed : options_.seed_order) {
            auto it = std::find_if(keys.begin(), keys.end(),
                                   [&](const DictionaryKey& k) { return k.seed == seed; });
            if (it == keys.end())
                throw std::invalid_argument("seed " + std::to_string(seed) +
                                            " not present in dictionary");
            session_keys_.push_back(*it);
        }
    }
}

DictionaryKey TesterServer::next_session_key() {
    std::size_t i = next_key_.fetch_add(1) % session_keys_.size();
    return session_keys_[i];
}

SessionLog TesterServer::handle_session(ByteStream& stream) {
    SessionLog log;
    DictionaryKey key = next_session_key();
    log.request = TestRequest{key.dut_id, key.seed, static_cast<std::uint32_t>(key.pattern_count),
                              static_cast<std::uint16_t>(key.digest_bits)};
    try {
        write_frame(stream, log.request);
        std::optional<ProtocolMessage> reply = read_frame(stream);
        if (!reply) {
            log.error = "peer closed before responding";
        } else if (const auto* err = std::get_if<ErrorMessage>(&*reply)) {
            log.error = "agent error " + std::to_string(err->code) + ": " + err->detail;
        } else if (const auto* resp = std::get_if<TestResponse>(&*reply)) {
            if (resp->signature.size() * 8 != key.digest_bits) {
                log.error = "signature length mismatch";
                write_frame(stream, ErrorMessage{kErrBadResponse, log.error});
            } else {
                log.diagnosis = lookup(dict_, key, Signature{resp->signature});
                DiagResult diag{log.diagnosis.verdict, log.diagnosis.fault_ids};
                write_frame(stream, diag);
                log.completed = true;
            }
        } else {
            log.error = "unexpected message type";
            write_frame(stream, ErrorMessage{kErrUnexpectedMessage, log.error});
        }
    } catch (const ProtocolError& e) {
        log.error = e.what();
        switch (e.kind()) {
            case ProtocolError::Kind::BadMagic:
            case ProtocolError::Kind::BadVersion:
            case ProtocolError::Kind::BadType:
            case ProtocolError::Kind::BadPayload:
            case ProtocolError::Kind::Overflow:
                try {
                    write_frame(stream, ErrorMessage{kErrMalformedFrame, e.what()});
                } catch (const ProtocolError&) {
                }
                break;
            default:
                break;  // timeout, transport, truncation: session just ends
        }
    }
    {
        std::lock_guard lock(logs_mutex_);
        logs_.push_back(log);
    }
    return log;
}

void TesterServer::serve(TcpListener& listener) {
    listener_ = &listener;
    std::vector<std::thread> sessions;
    while (!stopping_) {
        std::unique_ptr<TcpStream> conn = listener.accept();
        if (!conn || stopping_) break;
        sessions.emplace_back([this, conn = std::move(conn)]() mutable {
            conn->set_read_timeout(options_.response_timeout);
            handle_session(*conn);
        });
    }
    for (std::thread& t : sessions) t.join();
    listener_ = nullptr;
}

void TesterServer::stop() {
    stopping_ = true;
    if (listener_ != nullptr) listener_->close();
}

std::vector<SessionLog> TesterServer::drain_logs() {
    std::lock_guard lock(logs_mutex_);
    return std::exchange(logs_, {});
}

std::optional<DiagResult> agent_handle_session(const SocConfig& soc, ByteStream& stream) {
    std::optional<DiagResult> last_diag;
    while (true) {
        std::optional<ProtocolMessage> frame;
        try {
            frame = read_frame(stream);
        } catch (const ProtocolError& e) {
            switch (e.kind()) {
                case ProtocolError::Kind::BadMagic:
                case ProtocolError::Kind::BadVersion:
                case ProtocolError::Kind::BadType:
                case ProtocolError::Kind::BadPayload:
                case ProtocolError::Kind::Overflow:
                    try {
                        write_frame(stream, ErrorMessage{kErrMalformedFrame, e.what()});
                    } catch (const ProtocolError&) {
                    }
                    return last_diag;
                default:
                    throw;
            }
        }
        if (!frame) return last_diag;

        if (const auto* diag = std::get_if<DiagResult>(&*frame)) {
            last_diag = *diag;
            continue;
        }
        if (std::holds_alternative<ErrorMessage>(*frame)) continue;  // tester will close
        const auto* req = std::get_if<TestRequest>(&*frame);
        if (req == nullptr) {
            write_frame(stream, ErrorMessage{kErrUnexpectedMessage, "expected TEST_REQUEST"});
            return last_diag;
        }
        if (!soc.duts.contains(req->dut_id)) {
            write_frame(stream, ErrorMessage{kErrUnknownDut, "unknown DUT " + req->dut_id});
            continue;
        }
        try {
            Signature sig = compute_dut_signature(soc, req->dut_id, req->seed,
                                                  req->pattern_count, req->digest_bits);
            write_frame(stream, TestResponse{sig.digest});
        } catch (const ProtocolError&) {
            throw;
        } catch (const std::exception& e) {
            write_frame(stream, ErrorMessage{kErrInternal, e.what()});
        }
    }
}

std::optional<DiagResult> agent_run(const SocConfig& soc, const std::string& host_port) {
    std::unique_ptr<TcpStream> stream = TcpStream::connect(host_port);
    return agent_handle_session(soc, *stream);
}

}  // namespace kbist

#ifndef KBIST_REMOTE_HPP
#define KBIST_REMOTE_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "kbist/dictionary.hpp"
#include "kbist/testflow.hpp"

namespace kbist {

class ProtocolError : public std::runtime_error {
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        BadType,
        Overflow,
        Truncated,
        BadPayload,
        Timeout,
        Transport
    };

    ProtocolError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct TestRequest {
    std::string dut_id;
    std::uint32_t seed = 0;
    std::uint32_t pattern_count = 0;
    std::uint16_t digest_bits = 0;

    bool operator==(const TestRequest&) const = default;
};

struct TestResponse {
    std::vector<std::uint8_t> signature;

    bool operator==(const TestResponse&) const = default;
};

struct DiagResult {
    Verdict verdict = Verdict::InvalidSignature;
    std::vector<std::string> fault_ids;

    bool operator==(const DiagResult&) const = default;
};

struct ErrorMessage {
    std::uint16_t code = 0;
    std::string detail;

    bool operator==(const ErrorMessage&) const = default;
};

using ProtocolMessage = std::variant<TestRequest, TestResponse, DiagResult, ErrorMessage>;

inline constexpr std::uint16_t kErrUnknownDut = 1;
inline constexpr std::uint16_t kErrMalformedFrame = 2;
inline constexpr std::uint16_t kErrUnexpectedMessage = 3;
inline constexpr std::uint16_t kErrBadResponse = 4;
inline constexpr std::uint16_t kErrInternal = 5;

inline constexpr std::size_t kMaxPayload = 16 * 1024 * 1024;
inline constexpr std::uint8_t kProtocolVersion = 0x01;

// Frame: "KBST" | version | msg-type | payload-length (u32 BE) | payload.
std::vector<std::uint8_t> encode(const ProtocolMessage& msg);
ProtocolMessage decode(std::span<const std::uint8_t> frame);

// Blocking octet transport. read_some returns 0 at EOF.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual std::size_t read_some(std::span<std::uint8_t> buf) = 0;
    virtual void write_all(std::span<const std::uint8_t> data) = 0;
};

void write_frame(ByteStream& stream, const ProtocolMessage& msg);
// Empty optional on clean EOF before any header byte; throws on anything
// torn or malformed.
std::optional<ProtocolMessage> read_frame(ByteStream& stream);

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd);
    ~TcpStream() override;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    static std::unique_ptr<TcpStream> connect(const std::string& host_port);

    void set_read_timeout(std::chrono::milliseconds timeout);  // 0 = block forever
    std::size_t read_some(std::span<std::uint8_t> buf) override;
    void write_all(std::span<const std::uint8_t> data) override;
    void shutdown_both();

private:
    int fd_;
};

class TcpListener {
public:
    // "host:port"; port 0 binds an ephemeral port (see local_port()).
    explicit TcpListener(const std::string& host_port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t local_port() const { return port_; }
    std::unique_ptr<TcpStream> accept();  // nullptr once closed
    void close();

private:
    int fd_;
    std::uint16_t port_ = 0;
};

// Wraps another stream and keeps a copy of every octet in each direction,
// so tests can scan session transcripts for leaked key or response bytes.
class RecordingStream : public ByteStream {
public:
    explicit RecordingStream(ByteStream& inner) : inner_(inner) {}

    std::size_t read_some(std::span<std::uint8_t> buf) override;
    void write_all(std::span<const std::uint8_t> data) override;

    const std::vector<std::uint8_t>& inbound() const { return inbound_; }
    const std::vector<std::uint8_t>& outbound() const { return outbound_; }

private:
    ByteStream& inner_;
    std::vector<std::uint8_t> inbound_;
    std::vector<std::uint8_t> outbound_;
};

// In-memory connected pair; each end reads what the other wrote. Closing
// either end gives the peer EOF. Thread-safe.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_duplex_pair();

struct SessionLog {
    TestRequest request;
    Diagnosis diagnosis;
    bool completed = false;
    std::string error;
};

struct TesterOptions {
    std::chrono::milliseconds response_timeout{30000};
    std::vector<std::uint32_t> seed_order;  // overrides round-robin when set
};

// Trusted remote tester: holds the exhaustive dictionary, drives one
// Table-I exchange per connection.
class TesterServer {
public:
    explicit TesterServer(FaultDictionary dict, TesterOptions options = {});

    const FaultDictionary& dictionary() const { return dict_; }

    // One full exchange on an established stream: send TEST_REQUEST, await
    // TEST_RESPONSE, reply DIAG_RESULT.
    SessionLog handle_session(ByteStream& stream);

    // Accept loop; one thread per connection, runs until stop().
    void serve(TcpListener& listener);
    void stop();

    std::vector<SessionLog> drain_logs();

private:
    DictionaryKey next_session_key();

    FaultDictionary dict_;
    TesterOptions options_;
    std::vector<DictionaryKey> session_keys_;
    std::atomic<std::size_t> next_key_{0};
    std::atomic<bool> stopping_{false};
    TcpListener* listener_ = nullptr;
    std::mutex logs_mutex_;
    std::vector<SessionLog> logs_;
};

// DUT agent: owns the key and the simulated DUTs; answers TEST_REQUESTs
// until the peer closes, accepting DIAG_RESULTs in between. Never transmits
// raw responses or the key. Returns the last diagnosis received, if any.
std::optional<DiagResult> agent_handle_session(const SocConfig& soc, ByteStream& stream);

// Connect to a tester and serve one session; throws ProtocolError on
// transport failure (default policy: no retry).
std::optional<DiagResult> agent_run(const SocConfig& soc, const std::string& host_port);

}  // namespace kbist

#endif

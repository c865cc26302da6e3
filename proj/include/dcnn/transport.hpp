#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "dcnn/frame.hpp"

namespace dcnn {

class TransportError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class RecvStatus { Ok, Eof, Timeout };

/// Reliable ordered byte stream; the framing on top is identical for every
/// implementation.
class ByteStream {
public:
  virtual ~ByteStream() = default;
  virtual void send(const uint8_t* data, std::size_t len) = 0;
  virtual RecvStatus recv_exact(uint8_t* out, std::size_t len,
                                std::chrono::milliseconds timeout) = 0;
  /// Close the sending direction; the peer sees EOF after draining.
  virtual void close_send() = 0;
};

/// Sends one length-prefixed frame.
void send_frame(ByteStream& stream, const BlobFrame& frame);

/// Receives one frame. Throws FrameError on corruption; Eof/Timeout are
/// reported through the status.
struct FrameRecvResult {
  RecvStatus status = RecvStatus::Eof;
  std::optional<BlobFrame> frame;
};
FrameRecvResult recv_frame(ByteStream& stream, std::chrono::milliseconds timeout);

/// In-process unidirectional byte pipe.
class InprocPipe {
public:
  void write(const uint8_t* data, std::size_t len);
  RecvStatus read_exact(uint8_t* out, std::size_t len, std::chrono::milliseconds timeout);
  void close();

private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<uint8_t>> chunks_;
  std::size_t head_offset_ = 0;
  bool closed_ = false;
};

/// Stream over two pipes (one per direction); either side may be null for
/// one-way links.
class InprocStream : public ByteStream {
public:
  InprocStream(std::shared_ptr<InprocPipe> in, std::shared_ptr<InprocPipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  void send(const uint8_t* data, std::size_t len) override;
  RecvStatus recv_exact(uint8_t* out, std::size_t len,
                        std::chrono::milliseconds timeout) override;
  void close_send() override;

private:
  std::shared_ptr<InprocPipe> in_;
  std::shared_ptr<InprocPipe> out_;
};

/// TCP loopback stream over a connected socket.
class TcpStream : public ByteStream {
public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  void send(const uint8_t* data, std::size_t len) override;
  RecvStatus recv_exact(uint8_t* out, std::size_t len,
                        std::chrono::milliseconds timeout) override;
  void close_send() override;

private:
  int fd_ = -1;
};

class TcpListener {
public:
  /// Binds 127.0.0.1:port; port 0 picks an ephemeral port.
  explicit TcpListener(uint16_t port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  std::unique_ptr<TcpStream> accept(std::chrono::milliseconds timeout);

private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

std::unique_ptr<TcpStream> tcp_connect(const std::string& host, uint16_t port,
                                       std::chrono::milliseconds timeout);

}  // namespace dcnn

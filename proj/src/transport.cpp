#include "dcnn/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dcnn {

void send_frame(ByteStream& stream, const BlobFrame& frame) {
  const std::vector<uint8_t> bytes = encode_frame(frame);
  stream.send(bytes.data(), bytes.size());
}

FrameRecvResult recv_frame(ByteStream& stream, std::chrono::milliseconds timeout) {
  uint8_t len_buf[4];
  const RecvStatus st = stream.recv_exact(len_buf, 4, timeout);
  if (st != RecvStatus::Ok) return {st, std::nullopt};
  uint32_t body_len = 0;
  for (int i = 3; i >= 0; --i) body_len = (body_len << 8) | len_buf[i];
  if (body_len == 0 || body_len > kMaxFrameBody) {
    throw FrameError(FrameErrorKind::BadHeader,
                     "implausible frame length " + std::to_string(body_len));
  }
  std::vector<uint8_t> body(body_len);
  const RecvStatus st2 = stream.recv_exact(body.data(), body.size(), timeout);
  if (st2 == RecvStatus::Eof) {
    throw FrameError(FrameErrorKind::Truncated, "stream ended mid-frame");
  }
  if (st2 == RecvStatus::Timeout) return {RecvStatus::Timeout, std::nullopt};
  return {RecvStatus::Ok, decode_frame(body.data(), body.size())};
}

void InprocPipe::write(const uint8_t* data, std::size_t len) {
  if (len == 0) return;
  std::lock_guard<std::mutex> lock(mu_);
  if (closed_) throw TransportError("write to closed pipe");
  chunks_.emplace_back(data, data + len);
  cv_.notify_all();
}

RecvStatus InprocPipe::read_exact(uint8_t* out, std::size_t len,
                                  std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock<std::mutex> lock(mu_);
  std::size_t got = 0;
  while (got < len) {
    if (chunks_.empty()) {
      if (closed_) return RecvStatus::Eof;
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && chunks_.empty()) {
        return RecvStatus::Timeout;
      }
      continue;
    }
    const std::vector<uint8_t>& head = chunks_.front();
    const std::size_t avail = head.size() - head_offset_;
    const std::size_t take = std::min(avail, len - got);
    std::memcpy(out + got, head.data() + head_offset_, take);
    got += take;
    head_offset_ += take;
    if (head_offset_ == head.size()) {
      chunks_.pop_front();
      head_offset_ = 0;
    }
  }
  return RecvStatus::Ok;
}

void InprocPipe::close() {
  std::lock_guard<std::mutex> lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

void InprocStream::send(const uint8_t* data, std::size_t len) {
  if (!out_) throw TransportError("stream has no send direction");
  out_->write(data, len);
}

RecvStatus InprocStream::recv_exact(uint8_t* out, std::size_t len,
                                    std::chrono::milliseconds timeout) {
  if (!in_) throw TransportError("stream has no receive direction");
  return in_->read_exact(out, len, timeout);
}

void InprocStream::close_send() {
  if (out_) out_->close();
}

TcpStream::~TcpStream() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpStream::send(const uint8_t* data, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

RecvStatus TcpStream::recv_exact(uint8_t* out, std::size_t len,
                                 std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t got = 0;
  while (got < len) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) return RecvStatus::Timeout;
    struct pollfd pfd {fd_, POLLIN, 0};
    const int wait_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
    const int pr = ::poll(&pfd, 1, std::max(wait_ms, 1));
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (pr == 0) return RecvStatus::Timeout;
    const ssize_t n = ::recv(fd_, out + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (n == 0) return RecvStatus::Eof;
    got += static_cast<std::size_t>(n);
  }
  return RecvStatus::Ok;
}

void TcpStream::close_send() { ::shutdown(fd_, SHUT_WR); }

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw TransportError("bind failed: " + err);
  }
  if (::listen(fd_, 8) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw TransportError("listen failed: " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpListener::accept(std::chrono::milliseconds timeout) {
  struct pollfd pfd {fd_, POLLIN, 0};
  const int pr = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (pr <= 0) throw TransportError("accept timed out");
  const int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<TcpStream>(cfd);
}

std::unique_ptr<TcpStream> tcp_connect(const std::string& host, uint16_t port,
                                       std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw TransportError("bad address '" + host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return std::make_unique<TcpStream>(fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TransportError("connect to " + host + ":" + std::to_string(port) + " timed out");
    }
    ::usleep(2000);
  }
}

}  // namespace dcnn

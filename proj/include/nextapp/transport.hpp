// Copyright 2026 The nextapp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Line-oriented byte-stream transports for external backends: a child
// process spoken to over its stdin/stdout, or a TCP connection.

#include <chrono>
#include <csignal>
#include <memory>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "nextapp/error.hpp"

extern char** environ;

namespace nextapp {

struct ReadResult {
  enum class Status { kLine, kTimeout, kEof };
  Status status = Status::kTimeout;
  std::string line;
};

class LineTransport {
 public:
  virtual ~LineTransport() = default;

  // Writes one line; a trailing newline is appended. Safe to call concurrently.
  virtual void write_line(std::string_view line) = 0;

  // Waits up to `timeout` for one complete line (newline stripped). Only one
  // thread may read at a time.
  virtual ReadResult read_line(std::chrono::milliseconds timeout) = 0;

  // Unblocks readers and releases the underlying resources.
  virtual void close() = 0;
};

// Transport over a pair of file descriptors (the same fd for sockets).
class FdTransport : public LineTransport {
 public:
  FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdTransport() override { FdTransport::close(); }

  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void write_line(std::string_view line) override {
    std::lock_guard lock(write_mu_);
    if (write_fd_ < 0) throw TransportError("write on closed transport");
    std::string buf(line);
    buf += '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::write(write_fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  ReadResult read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        ReadResult r{ReadResult::Status::kLine, buffer_.substr(0, nl)};
        buffer_.erase(0, nl + 1);
        if (!r.line.empty() && r.line.back() == '\r') r.line.pop_back();
        return r;
      }
      if (eof_ || read_fd_ < 0) return {ReadResult::Status::kEof, {}};
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return {ReadResult::Status::kTimeout, {}};
      // Poll in short slices so close() from another thread is noticed.
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 50)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        eof_ = true;
      } else if (n == 0) {
        eof_ = true;
      } else {
        buffer_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

  void close() override {
    std::lock_guard lock(write_mu_);
    if (read_fd_ >= 0 && read_fd_ == write_fd_) {
      ::shutdown(read_fd_, SHUT_RDWR);
      ::close(read_fd_);
    } else {
      if (read_fd_ >= 0) ::close(read_fd_);
      if (write_fd_ >= 0) ::close(write_fd_);
    }
    read_fd_ = -1;
    write_fd_ = -1;
  }

 protected:
  // Closes only the write side, signalling EOF to the peer.
  void close_write() {
    std::lock_guard lock(write_mu_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) {
      ::close(write_fd_);
      write_fd_ = -1;
    }
  }

 private:
  int read_fd_ = -1;
  int write_fd_ = -1;
  std::mutex write_mu_;
  std::string buffer_;
  bool eof_ = false;
};

// Runs `/bin/sh -c command` and talks to it over its stdin/stdout. The
// child's stderr is inherited. SIGPIPE is ignored process-wide so a dead
// child surfaces as a write error instead of killing the caller.
class ChildProcessTransport final : public FdTransport {
 public:
  static std::unique_ptr<ChildProcessTransport> spawn(const std::string& command) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw TransportError("pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", flag = "-c", cmd = command;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw TransportError("cannot start backend '" + command + "': " + std::strerror(rc));
    }
    return std::unique_ptr<ChildProcessTransport>(
        new ChildProcessTransport(from_child[0], to_child[1], pid));
  }

  ~ChildProcessTransport() override { ChildProcessTransport::close(); }

  void close() override {
    close_write();
    if (pid_ > 0) {
      // Give the child a moment to exit on EOF before escalating.
      for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
          pid_ = -1;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
        pid_ = -1;
      }
    }
    FdTransport::close();
  }

 private:
  ChildProcessTransport(int read_fd, int write_fd, pid_t pid)
      : FdTransport(read_fd, write_fd), pid_(pid) {}

  pid_t pid_ = -1;
};

class TcpTransport final : public FdTransport {
 public:
  // Connects to host:port, retrying `retries` extra times with a linear backoff.
  static std::unique_ptr<TcpTransport> connect(const std::string& host, const std::string& port,
                                               std::size_t retries = 2,
                                               std::chrono::milliseconds backoff =
                                                   std::chrono::milliseconds(200)) {
    std::signal(SIGPIPE, SIG_IGN);
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(backoff * static_cast<int>(attempt));
      addrinfo hints{};
      hints.ai_family = AF_UNSPEC;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        last_error = ::gai_strerror(rc);
        continue;
      }
      int fd = -1;
      for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        last_error = std::strerror(errno);
        ::close(fd);
        fd = -1;
      }
      ::freeaddrinfo(res);
      if (fd >= 0) return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
    }
    throw TransportError("cannot connect to " + host + ":" + port + " after " +
                         std::to_string(retries + 1) + " attempts: " + last_error);
  }

 private:
  explicit TcpTransport(int fd) : FdTransport(fd, fd) {}
};

}  // namespace nextapp

#include <algorithm>
#include <chrono>
#include <deque>
#include <thread>

#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "conav/server.hpp"

namespace conav {

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, const ServerOptions& options) : ws_(std::move(socket)), hub_(options) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    read();
  }

  void read() { ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      hub_.disconnect();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (std::string& m : hub_.handle(text)) queue_.push_back(std::move(m));
    if (!writing_) write();
    read();
  }

  void write() {
    if (queue_.empty()) {
      writing_ = false;
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      hub_.disconnect();
      return;
    }
    queue_.pop_front();
    write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  SessionHub hub_;
  std::deque<std::string> queue_;
  bool writing_ = false;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(asio::io_context& ioc, tcp::endpoint endpoint, const ServerOptions& options)
      : ioc_(ioc), acceptor_(asio::make_strand(ioc)), options_(options) {
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(asio::socket_base::max_listen_connections);
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void accept() {
    acceptor_.async_accept(asio::make_strand(ioc_), beast::bind_front_handler(&Listener::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec, tcp::socket socket) {
    if (!ec) std::make_shared<Connection>(std::move(socket), options_)->run();
    accept();
  }

  asio::io_context& ioc_;
  tcp::acceptor acceptor_;
  ServerOptions options_;
};

}  // namespace

void serve(unsigned short port, const ServerOptions& options, const std::atomic<bool>& stop,
           const std::function<void(unsigned short)>& on_listen) {
  const int n_threads = static_cast<int>(std::max(2u, std::thread::hardware_concurrency()));
  asio::io_context ioc(n_threads);
  std::shared_ptr<Listener> listener;
  try {
    listener = std::make_shared<Listener>(ioc, tcp::endpoint(asio::ip::make_address("0.0.0.0"), port), options);
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::IoError, std::string("cannot listen on port ") + std::to_string(port) + ": " + e.what());
  }
  listener->accept();
  if (on_listen) on_listen(listener->port());

  auto loop = [&] {
    while (!stop.load()) ioc.run_for(std::chrono::milliseconds(100));
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(loop);
  loop();
  ioc.stop();
  for (auto& t : pool) t.join();
}

}  // namespace conav

#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <variant>
#include <vector>

#include "cocoi/errors.hpp"
#include "cocoi/tensor.hpp"

namespace cocoi {

// frame: "CCOI" | version u8 (=1) | msg_type u8 | payload_len u64 LE | payload
inline constexpr char kWireMagic[4] = {'C', 'C', 'O', 'I'};
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 14;
inline constexpr std::uint64_t kMaxPayloadBytes = 1ull << 30;

enum class MsgType : std::uint8_t {
  hello = 1,
  load_layer = 2,
  task_assign = 3,
  result_return = 4,
  cancel = 5,
  heartbeat = 6,
  error = 7,
};

struct HelloMsg {
  std::uint32_t worker_id = 0;
};

// spec fields travel explicitly; weights (+bias when present) follow as a
// raw f32 blob so they are shipped once per layer, not per task
struct LoadLayerMsg {
  std::uint32_t layer_id = 0;
  ConvSpec spec;
};

struct TaskAssignMsg {
  std::uint64_t task_id = 0;
  std::uint32_t layer_id = 0;
  std::uint32_t subtask_index = 0;
  Tensor4 tensor{};
};

struct ResultReturnMsg {
  std::uint64_t task_id = 0;
  std::uint32_t subtask_index = 0;
  Tensor4 tensor{};
};

struct CancelMsg {
  std::uint64_t task_id = 0;
};

struct HeartbeatMsg {};

struct ErrorMsg {
  std::string code;
  std::string text;
};

using Message = std::variant<HelloMsg, LoadLayerMsg, TaskAssignMsg, ResultReturnMsg, CancelMsg,
                             HeartbeatMsg, ErrorMsg>;

namespace detail {

inline void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void put_f32le(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32le(out, bits);
}

inline float get_f32le(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  if (s.size() > 0xffffffffull) throw ProtocolError("string too long");
  put_u32le(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

// cursor-style reader that throws ProtocolError instead of running off the end
struct Reader {
  const std::uint8_t* p;
  std::size_t left;

  void need(std::size_t n) const {
    if (left < n) throw ProtocolError("truncated payload");
  }
  std::uint8_t u8() {
    need(1);
    const std::uint8_t v = *p;
    ++p;
    --left;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = get_u32le(p);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    const std::uint64_t v = get_u64le(p);
    p += 8;
    left -= 8;
    return v;
  }
  float f32() {
    need(4);
    const float v = get_f32le(p);
    p += 4;
    left -= 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw ProtocolError("string field too long");
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
  std::vector<float> f32_array(std::size_t count) {
    if (count > (kMaxPayloadBytes / 4)) throw ProtocolError("array too long");
    need(count * 4);
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = get_f32le(p + 4 * i);
    p += count * 4;
    left -= count * 4;
    return v;
  }
  void done() const {
    if (left != 0) throw ProtocolError("trailing bytes in payload");
  }
};

}  // namespace detail

inline MsgType message_type(const Message& m) {
  switch (m.index()) {
    case 0: return MsgType::hello;
    case 1: return MsgType::load_layer;
    case 2: return MsgType::task_assign;
    case 3: return MsgType::result_return;
    case 4: return MsgType::cancel;
    case 5: return MsgType::heartbeat;
    default: return MsgType::error;
  }
}

inline std::vector<std::uint8_t> encode_payload(const Message& m) {
  std::vector<std::uint8_t> out;
  switch (message_type(m)) {
    case MsgType::hello:
      detail::put_u32le(out, std::get<HelloMsg>(m).worker_id);
      break;
    case MsgType::load_layer: {
      const LoadLayerMsg& msg = std::get<LoadLayerMsg>(m);
      const ConvSpec& sp = msg.spec;
      sp.validate();
      detail::put_u32le(out, msg.layer_id);
      detail::put_u32le(out, static_cast<std::uint32_t>(sp.in_channels));
      detail::put_u32le(out, static_cast<std::uint32_t>(sp.out_channels));
      detail::put_u32le(out, static_cast<std::uint32_t>(sp.kernel));
      detail::put_u32le(out, static_cast<std::uint32_t>(sp.stride));
      detail::put_u32le(out, static_cast<std::uint32_t>(sp.padding));
      out.push_back(sp.bias.empty() ? 0 : 1);
      for (float w : sp.weights.data()) detail::put_f32le(out, w);
      for (float b : sp.bias) detail::put_f32le(out, b);
      break;
    }
    case MsgType::task_assign: {
      const TaskAssignMsg& msg = std::get<TaskAssignMsg>(m);
      detail::put_u64le(out, msg.task_id);
      detail::put_u32le(out, msg.layer_id);
      detail::put_u32le(out, msg.subtask_index);
      const std::vector<std::uint8_t> t = serialize_tensor(msg.tensor);
      out.insert(out.end(), t.begin(), t.end());
      break;
    }
    case MsgType::result_return: {
      const ResultReturnMsg& msg = std::get<ResultReturnMsg>(m);
      detail::put_u64le(out, msg.task_id);
      detail::put_u32le(out, msg.subtask_index);
      const std::vector<std::uint8_t> t = serialize_tensor(msg.tensor);
      out.insert(out.end(), t.begin(), t.end());
      break;
    }
    case MsgType::cancel:
      detail::put_u64le(out, std::get<CancelMsg>(m).task_id);
      break;
    case MsgType::heartbeat:
      break;
    case MsgType::error: {
      const ErrorMsg& msg = std::get<ErrorMsg>(m);
      detail::put_string(out, msg.code);
      detail::put_string(out, msg.text);
      break;
    }
  }
  return out;
}

inline std::vector<std::uint8_t> encode_frame(const Message& m) {
  const std::vector<std::uint8_t> payload = encode_payload(m);
  std::vector<std::uint8_t> frame;
  frame.reserve(kFrameHeaderBytes + payload.size());
  frame.insert(frame.end(), kWireMagic, kWireMagic + 4);
  frame.push_back(kWireVersion);
  frame.push_back(static_cast<std::uint8_t>(message_type(m)));
  detail::put_u64le(frame, payload.size());
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

struct FrameHeader {
  std::uint8_t version = 0;
  MsgType type = MsgType::heartbeat;
  std::uint64_t payload_len = 0;
};

inline FrameHeader parse_frame_header(const std::uint8_t* p) {
  if (std::memcmp(p, kWireMagic, 4) != 0) throw ProtocolError("bad magic");
  FrameHeader h;
  h.version = p[4];
  if (h.version != kWireVersion) throw ProtocolError("unsupported version");
  const std::uint8_t t = p[5];
  if (t < 1 || t > 7) throw ProtocolError("unknown msg_type");
  h.type = static_cast<MsgType>(t);
  h.payload_len = detail::get_u64le(p + 6);
  if (h.payload_len > kMaxPayloadBytes) throw ProtocolError("payload too large");
  return h;
}

inline Message parse_payload(MsgType type, const std::uint8_t* p, std::size_t len) {
  detail::Reader r{p, len};
  switch (type) {
    case MsgType::hello: {
      HelloMsg m{r.u32()};
      r.done();
      return m;
    }
    case MsgType::load_layer: {
      LoadLayerMsg m;
      m.layer_id = r.u32();
      const std::uint32_t ci = r.u32();
      const std::uint32_t co = r.u32();
      const std::uint32_t kk = r.u32();
      const std::uint32_t st = r.u32();
      const std::uint32_t pad = r.u32();
      const std::uint8_t has_bias = r.u8();
      if (has_bias > 1) throw ProtocolError("bad bias flag");
      if (ci == 0 || co == 0 || kk == 0 || st == 0 || ci > (1u << 16) || co > (1u << 16) ||
          kk > (1u << 12) || st > (1u << 12) || pad > (1u << 12))
        throw ProtocolError("conv spec fields out of range");
      const std::uint64_t wcount =
          static_cast<std::uint64_t>(co) * ci * kk * kk;
      if (wcount * 4 > kMaxPayloadBytes) throw ProtocolError("weights too large");
      m.spec.in_channels = static_cast<int>(ci);
      m.spec.out_channels = static_cast<int>(co);
      m.spec.kernel = static_cast<int>(kk);
      m.spec.stride = static_cast<int>(st);
      m.spec.padding = static_cast<int>(pad);
      try {
        m.spec.weights =
            Tensor4(Dims4{co, ci, kk, kk}, r.f32_array(static_cast<std::size_t>(wcount)));
      } catch (const GeometryError& e) {
        throw ProtocolError(std::string("invalid weights: ") + e.what());
      }
      if (has_bias) m.spec.bias = r.f32_array(co);
      r.done();
      try {
        m.spec.validate();
      } catch (const std::exception& e) {
        throw ProtocolError(std::string("invalid conv spec: ") + e.what());
      }
      return m;
    }
    case MsgType::task_assign: {
      TaskAssignMsg m;
      m.task_id = r.u64();
      m.layer_id = r.u32();
      m.subtask_index = r.u32();
      try {
        m.tensor = parse_tensor(r.p, r.left);
      } catch (const GeometryError& e) {
        throw ProtocolError(std::string("invalid tensor: ") + e.what());
      }
      return m;
    }
    case MsgType::result_return: {
      ResultReturnMsg m;
      m.task_id = r.u64();
      m.subtask_index = r.u32();
      try {
        m.tensor = parse_tensor(r.p, r.left);
      } catch (const GeometryError& e) {
        throw ProtocolError(std::string("invalid tensor: ") + e.what());
      }
      return m;
    }
    case MsgType::cancel: {
      CancelMsg m{r.u64()};
      r.done();
      return m;
    }
    case MsgType::heartbeat:
      r.done();
      return HeartbeatMsg{};
    case MsgType::error: {
      ErrorMsg m;
      m.code = r.str();
      m.text = r.str();
      r.done();
      return m;
    }
  }
  throw ProtocolError("unknown msg_type");
}

// whole-buffer convenience used by tests and the fuzzer
inline Message parse_frame(const std::uint8_t* p, std::size_t len) {
  if (len < kFrameHeaderBytes) throw ProtocolError("short frame");
  const FrameHeader h = parse_frame_header(p);
  if (len - kFrameHeaderBytes != h.payload_len) throw ProtocolError("length mismatch");
  return parse_payload(h.type, p + kFrameHeaderBytes, static_cast<std::size_t>(h.payload_len));
}

}  // namespace cocoi

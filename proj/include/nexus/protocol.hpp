#pragma once

// Wire codecs for the two channels. Layouts are little-endian and documented
// bit-exactly in PROTOCOL.md; golden hex fixtures live in the tests.
//
//   Pointer datagram (unreliable): fixed 32 bytes, trailing XOR checksum.
//   Reliable frame:   u32 length | u8 tag | payload | u8 checksum,
//                     where length counts everything after the length field.

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nexus/core.hpp"

namespace nexus::proto {

inline constexpr size_t kPointerFrameSize = 32;
inline constexpr uint32_t kMaxFrameLength = 64u << 20;

// ---------------------------------------------------------------------------
// Byte helpers

namespace detail {

struct Writer {
  std::vector<uint8_t> buf;

  void u8(uint8_t v) { buf.push_back(v); }
  void u16(uint16_t v) {
    buf.push_back(static_cast<uint8_t>(v));
    buf.push_back(static_cast<uint8_t>(v >> 8));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void bytes(const uint8_t* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct Reader {
  std::span<const uint8_t> buf;
  size_t off = 0;

  size_t remaining() const { return buf.size() - off; }

  void need(size_t n) const {
    if (remaining() < n) throw Error(Errc::length_mismatch, "frame payload too short");
  }

  uint8_t u8() {
    need(1);
    return buf[off++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(buf[off] | (buf[off + 1] << 8));
    off += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

inline uint8_t xor_checksum(std::span<const uint8_t> bytes) {
  uint8_t c = 0;
  for (uint8_t b : bytes) c ^= b;
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointer datagram (unreliable channel)

struct PointerDatagram {
  uint8_t peer_id = 0;
  uint16_t send_seq = 0;
  std::array<float, 3> ray_origin{};
  std::array<float, 3> ray_direction{{0.f, 0.f, 1.f}};
  uint8_t drawing_flag = 0;       // 0 | 1
  uint8_t annotation_count = 0;   // live annotation count, mod 256
  uint16_t active_cutout_id = 0;  // 0 = none

  bool operator==(const PointerDatagram&) const = default;
};

inline Vec3 direction_unit(const PointerDatagram& d) {
  return normalized(Vec3{d.ray_direction[0], d.ray_direction[1], d.ray_direction[2]});
}

inline Vec3 origin_vec(const PointerDatagram& d) {
  return {d.ray_origin[0], d.ray_origin[1], d.ray_origin[2]};
}

inline std::vector<uint8_t> encode_pointer(const PointerDatagram& d) {
  detail::Writer w;
  w.buf.reserve(kPointerFrameSize);
  w.u8(d.peer_id);
  w.u16(d.send_seq);
  for (float f : d.ray_origin) w.f32(f);
  for (float f : d.ray_direction) w.f32(f);
  w.u8(d.drawing_flag);
  w.u8(d.annotation_count);
  w.u16(d.active_cutout_id);
  w.u8(detail::xor_checksum(w.buf));
  return w.buf;
}

inline PointerDatagram decode_pointer(std::span<const uint8_t> bytes) {
  if (bytes.size() != kPointerFrameSize)
    throw Error(Errc::bad_length, "pointer frame must be 32 bytes");
  if (detail::xor_checksum(bytes.first(kPointerFrameSize - 1)) != bytes.back())
    throw Error(Errc::bad_checksum, "pointer frame checksum mismatch");

  detail::Reader r{bytes};
  PointerDatagram d;
  d.peer_id = r.u8();
  d.send_seq = r.u16();
  for (float& f : d.ray_origin) f = r.f32();
  for (float& f : d.ray_direction) f = r.f32();
  d.drawing_flag = r.u8();
  d.annotation_count = r.u8();
  d.active_cutout_id = r.u16();

  if (d.drawing_flag > 1) throw Error(Errc::bad_flag, "drawing flag must be 0 or 1");
  const double n = std::sqrt(double(d.ray_direction[0]) * d.ray_direction[0] +
                             double(d.ray_direction[1]) * d.ray_direction[1] +
                             double(d.ray_direction[2]) * d.ray_direction[2]);
  if (std::abs(n - 1.0) > 1e-3)
    throw Error(Errc::non_unit_direction, "ray direction is not unit length");
  return d;
}

// ---------------------------------------------------------------------------
// Reliable messages

struct WireTransform {
  std::array<float, 4> rotation{{1.f, 0.f, 0.f, 0.f}};  // w x y z
  std::array<float, 3> translation{};
  float scale = 1.f;
  bool operator==(const WireTransform&) const = default;
};

inline WireTransform to_wire(const SimTransform& t) {
  return {{static_cast<float>(t.rotation.w), static_cast<float>(t.rotation.x),
           static_cast<float>(t.rotation.y), static_cast<float>(t.rotation.z)},
          {static_cast<float>(t.translation.x), static_cast<float>(t.translation.y),
           static_cast<float>(t.translation.z)},
          static_cast<float>(t.scale)};
}

inline SimTransform from_wire(const WireTransform& w) {
  return {UnitQuat{w.rotation[0], w.rotation[1], w.rotation[2], w.rotation[3]},
          Vec3{w.translation[0], w.translation[1], w.translation[2]},
          static_cast<double>(w.scale)};
}

enum class PrimitiveKind : uint8_t { cube = 0, sphere = 1, cylinder = 2 };

struct ReplicaRef {
  uint32_t replica_id = 0;
  bool operator==(const ReplicaRef&) const = default;
};

using ObjectKind = std::variant<PrimitiveKind, ReplicaRef>;

struct ObjectProperties {
  uint8_t gravity_enabled = 0;
  std::array<uint8_t, 3> material_color{{255, 255, 255}};
  float uniform_scale = 1.f;
  bool operator==(const ObjectProperties&) const = default;
};

struct MeshChunkUpsert {
  uint32_t chunk_id = 0;
  std::vector<std::array<float, 3>> positions;
  std::optional<std::vector<std::array<uint8_t, 3>>> colors;  // same length as positions
  std::vector<std::array<uint32_t, 3>> triangles;
  bool operator==(const MeshChunkUpsert&) const = default;
};

struct MeshChunkRemove {
  uint32_t chunk_id = 0;
  bool operator==(const MeshChunkRemove&) const = default;
};

struct ObjectSpawn {
  uint32_t object_id = 0;
  ObjectKind kind = PrimitiveKind::cube;
  WireTransform transform;
  ObjectProperties properties;
  bool operator==(const ObjectSpawn&) const = default;
};

struct ObjectTransform {
  uint32_t object_id = 0;
  uint32_t object_seq = 0;
  WireTransform transform;
  bool operator==(const ObjectTransform&) const = default;
};

struct ObjectPropertyEdit {
  uint32_t object_id = 0;
  uint32_t object_seq = 0;
  ObjectProperties properties;
  bool operator==(const ObjectPropertyEdit&) const = default;
};

struct ObjectGrab {
  uint32_t object_id = 0;
  uint8_t peer_id = 0;
  bool operator==(const ObjectGrab&) const = default;
};

struct ObjectRelease {
  uint32_t object_id = 0;
  uint8_t peer_id = 0;
  bool operator==(const ObjectRelease&) const = default;
};

struct ObjectDespawn {
  uint32_t object_id = 0;
  bool operator==(const ObjectDespawn&) const = default;
};

struct CutoutCreate {
  uint16_t cutout_id = 0;
  std::array<float, 3> apex{};
  std::array<std::array<float, 3>, 4> points{};
  WireTransform source_frame;
  bool operator==(const CutoutCreate&) const = default;
};

struct CutoutTransform {
  uint16_t cutout_id = 0;
  WireTransform copy_frame;
  bool operator==(const CutoutTransform&) const = default;
};

struct CutoutActivate {
  uint16_t cutout_id = 0;
  bool operator==(const CutoutActivate&) const = default;
};

struct CutoutDeactivate {
  uint16_t cutout_id = 0;
  bool operator==(const CutoutDeactivate&) const = default;
};

struct ReplicaMeshAnnounce {
  uint32_t replica_id = 0;
  std::vector<uint8_t> obj_bytes;  // extended OBJ text
  bool operator==(const ReplicaMeshAnnounce&) const = default;
};

using ReliableMessage =
    std::variant<MeshChunkUpsert, MeshChunkRemove, ObjectSpawn, ObjectTransform,
                 ObjectPropertyEdit, ObjectGrab, ObjectRelease, ObjectDespawn, CutoutCreate,
                 CutoutTransform, CutoutActivate, CutoutDeactivate, ReplicaMeshAnnounce>;

enum class Tag : uint8_t {
  mesh_chunk_upsert = 1,
  mesh_chunk_remove = 2,
  object_spawn = 3,
  object_transform = 4,
  object_property_edit = 5,
  object_grab = 6,
  object_release = 7,
  object_despawn = 8,
  cutout_create = 9,
  cutout_transform = 10,
  cutout_activate = 11,
  cutout_deactivate = 12,
  replica_mesh_announce = 13,
};

namespace detail {

inline void write_transform(Writer& w, const WireTransform& t) {
  for (float f : t.rotation) w.f32(f);
  for (float f : t.translation) w.f32(f);
  w.f32(t.scale);
}

inline WireTransform read_transform(Reader& r) {
  WireTransform t;
  for (float& f : t.rotation) f = r.f32();
  for (float& f : t.translation) f = r.f32();
  t.scale = r.f32();
  return t;
}

inline void write_properties(Writer& w, const ObjectProperties& p) {
  w.u8(p.gravity_enabled);
  for (uint8_t c : p.material_color) w.u8(c);
  w.f32(p.uniform_scale);
}

inline ObjectProperties read_properties(Reader& r) {
  ObjectProperties p;
  p.gravity_enabled = r.u8();
  for (uint8_t& c : p.material_color) c = r.u8();
  p.uniform_scale = r.f32();
  return p;
}

struct PayloadWriter {
  Writer& w;

  void operator()(const MeshChunkUpsert& m) {
    w.u32(m.chunk_id);
    w.u8(m.colors ? 1 : 0);
    w.u32(static_cast<uint32_t>(m.positions.size()));
    w.u32(static_cast<uint32_t>(m.triangles.size()));
    for (const auto& p : m.positions)
      for (float f : p) w.f32(f);
    if (m.colors) {
      if (m.colors->size() != m.positions.size())
        throw Error(Errc::invalid_argument, "color count must match vertex count");
      for (const auto& c : *m.colors)
        for (uint8_t b : c) w.u8(b);
    }
    for (const auto& t : m.triangles)
      for (uint32_t i : t) w.u32(i);
  }
  void operator()(const MeshChunkRemove& m) { w.u32(m.chunk_id); }
  void operator()(const ObjectSpawn& m) {
    w.u32(m.object_id);
    if (const auto* prim = std::get_if<PrimitiveKind>(&m.kind)) {
      w.u8(0);
      w.u32(static_cast<uint32_t>(*prim));
    } else {
      w.u8(1);
      w.u32(std::get<ReplicaRef>(m.kind).replica_id);
    }
    write_transform(w, m.transform);
    write_properties(w, m.properties);
  }
  void operator()(const ObjectTransform& m) {
    w.u32(m.object_id);
    w.u32(m.object_seq);
    write_transform(w, m.transform);
  }
  void operator()(const ObjectPropertyEdit& m) {
    w.u32(m.object_id);
    w.u32(m.object_seq);
    write_properties(w, m.properties);
  }
  void operator()(const ObjectGrab& m) {
    w.u32(m.object_id);
    w.u8(m.peer_id);
  }
  void operator()(const ObjectRelease& m) {
    w.u32(m.object_id);
    w.u8(m.peer_id);
  }
  void operator()(const ObjectDespawn& m) { w.u32(m.object_id); }
  void operator()(const CutoutCreate& m) {
    w.u16(m.cutout_id);
    for (float f : m.apex) w.f32(f);
    for (const auto& p : m.points)
      for (float f : p) w.f32(f);
    write_transform(w, m.source_frame);
  }
  void operator()(const CutoutTransform& m) {
    w.u16(m.cutout_id);
    write_transform(w, m.copy_frame);
  }
  void operator()(const CutoutActivate& m) { w.u16(m.cutout_id); }
  void operator()(const CutoutDeactivate& m) { w.u16(m.cutout_id); }
  void operator()(const ReplicaMeshAnnounce& m) {
    w.u32(m.replica_id);
    w.u32(static_cast<uint32_t>(m.obj_bytes.size()));
    w.bytes(m.obj_bytes.data(), m.obj_bytes.size());
  }
};

}  // namespace detail

inline Tag message_tag(const ReliableMessage& msg) {
  return static_cast<Tag>(msg.index() + 1);
}

inline std::vector<uint8_t> encode_reliable(const ReliableMessage& msg) {
  detail::Writer body;
  body.u8(static_cast<uint8_t>(message_tag(msg)));
  std::visit(detail::PayloadWriter{body}, msg);
  body.u8(detail::xor_checksum(body.buf));

  detail::Writer frame;
  frame.buf.reserve(body.buf.size() + 4);
  frame.u32(static_cast<uint32_t>(body.buf.size()));
  frame.bytes(body.buf.data(), body.buf.size());
  return frame.buf;
}

namespace detail {

inline ReliableMessage decode_payload(Tag tag, Reader& r) {
  switch (tag) {
    case Tag::mesh_chunk_upsert: {
      MeshChunkUpsert m;
      m.chunk_id = r.u32();
      const uint8_t has_colors = r.u8();
      if (has_colors > 1) throw Error(Errc::length_mismatch, "bad color flag");
      const uint32_t nv = r.u32();
      const uint32_t nt = r.u32();
      const size_t need = size_t(nv) * (12 + (has_colors ? 3 : 0)) + size_t(nt) * 12;
      if (r.remaining() < need) throw Error(Errc::length_mismatch, "mesh payload too short");
      m.positions.resize(nv);
      for (auto& p : m.positions)
        for (float& f : p) f = r.f32();
      if (has_colors) {
        m.colors.emplace(nv);
        for (auto& c : *m.colors)
          for (uint8_t& b : c) b = r.u8();
      }
      m.triangles.resize(nt);
      for (auto& t : m.triangles)
        for (uint32_t& i : t) i = r.u32();
      return m;
    }
    case Tag::mesh_chunk_remove:
      return MeshChunkRemove{r.u32()};
    case Tag::object_spawn: {
      ObjectSpawn m;
      m.object_id = r.u32();
      const uint8_t kind_tag = r.u8();
      const uint32_t value = r.u32();
      if (kind_tag == 0) {
        if (value > static_cast<uint32_t>(PrimitiveKind::cylinder))
          throw Error(Errc::length_mismatch, "unknown primitive kind");
        m.kind = static_cast<PrimitiveKind>(value);
      } else if (kind_tag == 1) {
        m.kind = ReplicaRef{value};
      } else {
        throw Error(Errc::length_mismatch, "bad object kind tag");
      }
      m.transform = read_transform(r);
      m.properties = read_properties(r);
      return m;
    }
    case Tag::object_transform: {
      ObjectTransform m;
      m.object_id = r.u32();
      m.object_seq = r.u32();
      m.transform = read_transform(r);
      return m;
    }
    case Tag::object_property_edit: {
      ObjectPropertyEdit m;
      m.object_id = r.u32();
      m.object_seq = r.u32();
      m.properties = read_properties(r);
      return m;
    }
    case Tag::object_grab:
      return ObjectGrab{r.u32(), r.u8()};
    case Tag::object_release:
      return ObjectRelease{r.u32(), r.u8()};
    case Tag::object_despawn:
      return ObjectDespawn{r.u32()};
    case Tag::cutout_create: {
      CutoutCreate m;
      m.cutout_id = r.u16();
      for (float& f : m.apex) f = r.f32();
      for (auto& p : m.points)
        for (float& f : p) f = r.f32();
      m.source_frame = read_transform(r);
      return m;
    }
    case Tag::cutout_transform: {
      CutoutTransform m;
      m.cutout_id = r.u16();
      m.copy_frame = read_transform(r);
      return m;
    }
    case Tag::cutout_activate:
      return CutoutActivate{r.u16()};
    case Tag::cutout_deactivate:
      return CutoutDeactivate{r.u16()};
    case Tag::replica_mesh_announce: {
      ReplicaMeshAnnounce m;
      m.replica_id = r.u32();
      const uint32_t len = r.u32();
      if (r.remaining() < len) throw Error(Errc::length_mismatch, "obj blob too short");
      m.obj_bytes.assign(r.buf.begin() + r.off, r.buf.begin() + r.off + len);
      r.off += len;
      return m;
    }
  }
  throw Error(Errc::unknown_tag, "unknown reliable message tag");
}

}  // namespace detail

// Decodes one frame from the head of `bytes`. Returns nullopt when more
// bytes are needed (resumable); throws on malformed input.
inline std::optional<ReliableMessage> try_decode_reliable(std::span<const uint8_t> bytes,
                                                          size_t& consumed) {
  consumed = 0;
  if (bytes.size() < 4) return std::nullopt;
  detail::Reader head{bytes};
  const uint32_t len = head.u32();
  if (len < 2) throw Error(Errc::length_mismatch, "frame too short for tag and checksum");
  if (len > kMaxFrameLength) throw Error(Errc::length_mismatch, "frame length exceeds cap");
  if (bytes.size() < 4 + size_t(len)) return std::nullopt;

  const std::span<const uint8_t> body = bytes.subspan(4, len);
  if (detail::xor_checksum(body.first(len - 1)) != body.back())
    throw Error(Errc::bad_checksum, "reliable frame checksum mismatch");

  const uint8_t tag_byte = body[0];
  if (tag_byte < 1 || tag_byte > 13) throw Error(Errc::unknown_tag, "unknown reliable message tag");

  detail::Reader r{body.subspan(1, len - 2)};
  ReliableMessage msg = detail::decode_payload(static_cast<Tag>(tag_byte), r);
  if (r.remaining() != 0) throw Error(Errc::length_mismatch, "trailing bytes in frame payload");
  consumed = 4 + size_t(len);
  return msg;
}

// Decodes exactly one frame occupying the whole buffer.
inline ReliableMessage decode_reliable(std::span<const uint8_t> bytes) {
  size_t consumed = 0;
  auto msg = try_decode_reliable(bytes, consumed);
  if (!msg) throw Error(Errc::truncated, "frame is truncated");
  if (consumed != bytes.size())
    throw Error(Errc::length_mismatch, "trailing bytes after frame");
  return *msg;
}

// Incremental stream decoder: feed bytes, poll messages. Single-owner.
class StreamDecoder {
 public:
  void feed(std::span<const uint8_t> bytes) {
    if (failed_) throw Error(Errc::length_mismatch, "stream decoder already failed");
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }

  std::optional<ReliableMessage> poll() {
    if (failed_) throw Error(Errc::length_mismatch, "stream decoder already failed");
    size_t consumed = 0;
    std::optional<ReliableMessage> msg;
    try {
      msg = try_decode_reliable(buf_, consumed);
    } catch (const Error&) {
      failed_ = true;
      throw;
    }
    if (msg) buf_.erase(buf_.begin(), buf_.begin() + consumed);
    return msg;
  }

  size_t buffered() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
  bool failed_ = false;
};

}  // namespace nexus::proto

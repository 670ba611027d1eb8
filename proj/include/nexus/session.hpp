#pragma once

// Per-peer replicated state machine. Each peer applies the same byte stream
// it sends to the network to itself (loopback), so both sides run identical
// decode + apply paths and converge without any shared-state shortcut.
//
// Conventions: peer 0 is the AR side (owns the environment mesh, spawns even
// object ids), peer 1 is the VR side (owns cutouts and the head-proxy object
// id 1, spawns odd ids). Remote data is never trusted: invalid or stale
// input is dropped and counted, never thrown.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nexus/align.hpp"
#include "nexus/frustum.hpp"
#include "nexus/mesh.hpp"
#include "nexus/obj.hpp"
#include "nexus/protocol.hpp"

namespace nexus {

enum class Role : uint8_t { ar = 0, vr = 1 };

// VR head pose rides on a reserved shared object so avatar placement needs
// no extra message type.
inline constexpr uint32_t kHeadObjectId = 1;
inline constexpr double kPointerReach = 2.0;  // meters, for misses

// ---------------------------------------------------------------------------
// Annotation byte semantics

// The annotation count byte is the owner's live annotation count mod 256.
// Differences are classified inside a +/-32 window; anything else is treated
// as skew and ignored.
struct AnnotationStep {
  int delete_count = 0;   // delete this many latest annotations first
  bool begin = false;     // then begin a new polyline
  bool append = false;    // then append the raycast point to the open polyline
  bool out_of_window = false;
};

inline AnnotationStep annotation_step(uint8_t prev_flag, uint8_t flag, uint8_t prev_count,
                                      uint8_t count) {
  AnnotationStep step;
  const uint8_t fwd = static_cast<uint8_t>(count - prev_count);
  int delta = 0;
  bool in_window = true;
  if (fwd == 0) {
    delta = 0;
  } else if (fwd <= 32) {
    delta = fwd;
  } else if (fwd >= 224) {
    delta = static_cast<int>(fwd) - 256;
  } else {
    in_window = false;
  }

  if (!in_window) {
    step.out_of_window = true;
  } else if (delta < 0) {
    step.delete_count = -delta;
  }

  const bool rising_edge = prev_flag == 0 && flag == 1;
  const bool missed_restart = prev_flag == 1 && flag == 1 && in_window && delta > 0;
  step.begin = rising_edge || missed_restart;
  step.append = flag == 1;
  return step;
}

// Mod-2^16 freshness window for pointer datagrams.
inline bool seq_newer(uint16_t candidate, uint16_t latest) {
  const uint16_t fwd = static_cast<uint16_t>(candidate - latest);
  return fwd >= 1 && fwd <= 1024;
}

// ---------------------------------------------------------------------------
// Replicated state records

struct AnnotationKey {
  uint8_t owner = 0;
  uint32_t ordinal = 0;
  auto operator<=>(const AnnotationKey&) const = default;
};

enum class Attachment : uint8_t { floating = 0, mesh_surface = 1, cutout_copy = 2 };

struct Annotation {
  AnnotationKey id;
  Attachment attachment = Attachment::floating;
  uint16_t cutout_id = 0;          // when attachment == cutout_copy
  std::vector<Vec3> points;        // world space
  uint64_t mesh_version = 0;       // snapshot version at creation
};

struct SharedObject {
  uint32_t id = 0;
  proto::ObjectKind kind = proto::PrimitiveKind::cube;
  SimTransform transform;          // world space
  proto::ObjectProperties properties;
  uint32_t last_seq = 0;           // last accepted update
  uint32_t last_sent_seq = 0;      // local bookkeeping, not replicated
  std::optional<uint8_t> held_by;
};

struct Cutout {
  uint16_t id = 0;
  SimTransform source_frame;  // pose of the selected region in world, scale 1
  SimTransform copy_frame;    // current pose of the live copy
  bool active = false;
  TriangleMesh source_mesh;   // selected triangles, world coordinates
  std::vector<TriangleRef> provenance;
};

struct ReplicaAsset {
  uint32_t id = 0;
  std::vector<uint8_t> obj_bytes;
  TriangleMesh mesh;
};

// World pose of a pose given relative to the cutout copy: F_src o F_copy^-1.
inline SimTransform map_cutout_to_world(const Cutout& c, const SimTransform& pose_in_copy_space) {
  return c.source_frame * c.copy_frame.inverse() * pose_in_copy_space;
}

inline SimTransform map_world_to_cutout(const Cutout& c, const SimTransform& world_pose) {
  return c.copy_frame * c.source_frame.inverse() * world_pose;
}

// ---------------------------------------------------------------------------
// Peer engine

struct EngineCounters {
  uint64_t malformed_datagrams = 0;
  uint64_t stale_datagrams = 0;
  uint64_t stale_updates = 0;
  uint64_t grab_rejects = 0;
  uint64_t unknown_targets = 0;
  uint64_t skew_events = 0;
};

class PeerEngine {
 public:
  PeerEngine(uint8_t peer_id, Role role) : peer_id_(peer_id), role_(role) {
    if (peer_id > 1) throw Error(Errc::invalid_argument, "peer id must be 0 or 1");
    next_object_id_ = role == Role::ar ? 2 : 1;
    if (role == Role::vr) {
      // Head proxy: a tiny sphere that carries the VR head pose.
      proto::ObjectSpawn spawn;
      spawn.object_id = allocate_object_id();
      spawn.kind = proto::PrimitiveKind::sphere;
      spawn.properties.uniform_scale = 0.1f;
      send_reliable(spawn);
    }
  }

  uint8_t peer_id() const { return peer_id_; }
  Role role() const { return role_; }
  const EngineCounters& counters() const { return counters_; }

  // -- outbound queues (drained by the harness / simulator) ---------------

  std::vector<std::vector<uint8_t>> take_unreliable_out() { return std::move(out_unreliable_); }
  std::vector<std::vector<uint8_t>> take_reliable_out() { return std::move(out_reliable_); }

  // -- configuration -------------------------------------------------------

  void set_alignment(const SimTransform& peer_to_camera) { alignment_ = peer_to_camera; }

  void set_alignment_from_anchors(const std::vector<AnchorObservation>& observations) {
    alignment_ = align_spaces(observations).transform;
  }

  const SimTransform& alignment() const { return alignment_; }

  // -- local user actions (emit wire bytes only; state changes on loopback) -

  void local_pointer_move(const Vec3& origin, const Vec3& direction) {
    const Vec3 d = normalized(direction);
    cur_origin_ = {static_cast<float>(origin.x), static_cast<float>(origin.y),
                   static_cast<float>(origin.z)};
    cur_direction_ = {static_cast<float>(d.x), static_cast<float>(d.y), static_cast<float>(d.z)};
    send_datagram();
  }

  void local_draw_start() {
    if (drawing_) throw Error(Errc::invalid_argument, "already drawing");
    drawing_ = true;
    live_count_ = static_cast<uint8_t>(live_count_ + 1);
    ++own_live_;
    send_datagram();
  }

  void local_draw_stop() {
    if (!drawing_) throw Error(Errc::invalid_argument, "not drawing");
    drawing_ = false;
    send_datagram();
  }

  void local_delete_latest_annotation() {
    if (drawing_) throw Error(Errc::invalid_argument, "cannot delete while drawing");
    if (own_live_ <= 0) throw Error(Errc::invalid_argument, "no annotation to delete");
    live_count_ = static_cast<uint8_t>(live_count_ - 1);
    --own_live_;
    send_datagram();
  }

  uint32_t local_spawn_object(const proto::ObjectKind& kind, const SimTransform& transform,
                              const proto::ObjectProperties& props) {
    proto::ObjectSpawn msg;
    msg.object_id = allocate_object_id();
    msg.kind = kind;
    msg.transform = proto::to_wire(transform);
    msg.properties = props;
    send_reliable(msg);
    return msg.object_id;
  }

  void local_grab_object(uint32_t id) {
    require_object(id);
    send_reliable(proto::ObjectGrab{id, peer_id_});
  }

  void local_release_object(uint32_t id) {
    require_object(id);
    send_reliable(proto::ObjectRelease{id, peer_id_});
  }

  void local_despawn_object(uint32_t id) {
    require_object(id);
    send_reliable(proto::ObjectDespawn{id});
  }

  // Moves an object. When `in_cutout` is set the pose is interpreted
  // relative to that cutout's copy and mapped back to world space, so only
  // world state ever crosses the wire.
  void local_move_object(uint32_t id, const SimTransform& pose,
                         std::optional<uint16_t> in_cutout = std::nullopt) {
    SharedObject& obj = require_object(id);
    if (obj.held_by && *obj.held_by != peer_id_)
      throw Error(Errc::grab_conflict, "object is grabbed by the other peer");
    SimTransform world = pose;
    if (in_cutout) world = map_cutout_to_world(require_cutout(*in_cutout), pose);
    proto::ObjectTransform msg;
    msg.object_id = id;
    msg.object_seq = next_object_seq(obj);
    msg.transform = proto::to_wire(world);
    send_reliable(msg);
  }

  void local_edit_object(uint32_t id, const proto::ObjectProperties& props) {
    SharedObject& obj = require_object(id);
    if (obj.held_by && *obj.held_by != peer_id_)
      throw Error(Errc::grab_conflict, "object is grabbed by the other peer");
    proto::ObjectPropertyEdit msg;
    msg.object_id = id;
    msg.object_seq = next_object_seq(obj);
    msg.properties = props;
    send_reliable(msg);
  }

  void local_set_head_pose(const SimTransform& pose) {
    if (role_ != Role::vr) throw Error(Errc::role_violation, "only the VR peer moves the head");
    local_move_object(kHeadObjectId, pose);
  }

  // AR-side environment mesh updates.
  void local_upsert_mesh(const TriangleMesh& mesh) {
    if (role_ != Role::ar) throw Error(Errc::role_violation, "only the AR peer owns the mesh");
    proto::MeshChunkUpsert msg;
    msg.chunk_id = mesh.chunk_id;
    msg.positions.reserve(mesh.vertices.size());
    const bool colored = !mesh.vertices.empty() && mesh.vertices.front().color.has_value();
    if (colored) msg.colors.emplace();
    for (const auto& v : mesh.vertices) {
      msg.positions.push_back({static_cast<float>(v.position.x), static_cast<float>(v.position.y),
                               static_cast<float>(v.position.z)});
      if (colored) {
        const Vec3 c = v.color.value_or(Vec3{1, 1, 1});
        msg.colors->push_back({quantize_color(c.x), quantize_color(c.y), quantize_color(c.z)});
      }
    }
    msg.triangles = mesh.triangles;
    send_reliable(msg);
  }

  void local_remove_mesh_chunk(uint32_t chunk_id) {
    if (role_ != Role::ar) throw Error(Errc::role_violation, "only the AR peer owns the mesh");
    send_reliable(proto::MeshChunkRemove{chunk_id});
  }

  // VR-side cutout lifecycle. Selection runs on the local snapshot to
  // validate and derive the source frame; the receiver re-selects on its own
  // (replicated) snapshot.
  uint16_t local_create_cutout(const Vec3& apex, const std::array<Vec3, 4>& points) {
    if (role_ != Role::vr) throw Error(Errc::role_violation, "only the VR peer creates cutouts");
    const SelectionFrustum frustum = build_frustum(apex, points);
    const SelectionResult sel = select_triangles(mesh_, frustum);

    Vec3 centroid;
    for (const auto& v : sel.mesh.vertices) centroid += v.position;
    centroid *= 1.0 / static_cast<double>(sel.mesh.vertices.size());

    proto::CutoutCreate msg;
    msg.cutout_id = next_cutout_id_++;
    msg.apex = {static_cast<float>(apex.x), static_cast<float>(apex.y),
                static_cast<float>(apex.z)};
    for (int i = 0; i < 4; ++i)
      msg.points[i] = {static_cast<float>(points[i].x), static_cast<float>(points[i].y),
                       static_cast<float>(points[i].z)};
    msg.source_frame = proto::to_wire(SimTransform{UnitQuat::identity(), centroid, 1.0});
    send_reliable(msg);
    return msg.cutout_id;
  }

  void local_transform_cutout(uint16_t id, const SimTransform& copy_frame) {
    if (role_ != Role::vr) throw Error(Errc::role_violation, "only the VR peer moves cutouts");
    require_cutout(id);
    if (copy_frame.scale <= 0) throw Error(Errc::invalid_argument, "copy frame scale must be > 0");
    send_reliable(proto::CutoutTransform{id, proto::to_wire(copy_frame)});
  }

  void local_activate_cutout(uint16_t id) {
    if (role_ != Role::vr) throw Error(Errc::role_violation, "only the VR peer activates cutouts");
    require_cutout(id);
    send_reliable(proto::CutoutActivate{id});
  }

  void local_deactivate_cutout(uint16_t id) {
    if (role_ != Role::vr) throw Error(Errc::role_violation, "only the VR peer activates cutouts");
    require_cutout(id);
    send_reliable(proto::CutoutDeactivate{id});
  }

  // AR-side replica sharing: the pipeline output is announced as raw OBJ
  // bytes; both sides parse it into a shared asset.
  void local_announce_replica(uint32_t replica_id, std::vector<uint8_t> obj_bytes) {
    if (role_ != Role::ar) throw Error(Errc::role_violation, "only the AR peer scans replicas");
    send_reliable(proto::ReplicaMeshAnnounce{replica_id, std::move(obj_bytes)});
  }

  // -- inbound (network or loopback) ---------------------------------------

  void ingest_datagram(std::span<const uint8_t> bytes) {
    proto::PointerDatagram dg;
    try {
      dg = proto::decode_pointer(bytes);
    } catch (const Error&) {
      ++counters_.malformed_datagrams;
      return;
    }
    if (dg.peer_id > 1) {
      ++counters_.malformed_datagrams;
      return;
    }

    PointerTrack& track = tracks_[dg.peer_id];
    if (track.has && !seq_newer(dg.send_seq, track.last.send_seq)) {
      ++counters_.stale_datagrams;
      return;
    }

    const uint8_t prev_flag = track.has ? track.last.drawing_flag : 0;
    const uint8_t prev_count = track.has ? track.last.annotation_count : 0;
    const AnnotationStep step =
        annotation_step(prev_flag, dg.drawing_flag, prev_count, dg.annotation_count);

    if (step.out_of_window) ++counters_.skew_events;
    for (int i = 0; i < step.delete_count; ++i) delete_latest_of(dg.peer_id);
    if (step.begin) track.open_polyline.reset();
    if (step.append) append_point(dg, track);

    track.last = dg;
    track.has = true;
  }

  void ingest_reliable_frame(std::span<const uint8_t> bytes, uint8_t from_peer) {
    proto::ReliableMessage msg;
    try {
      msg = proto::decode_reliable(bytes);
    } catch (const Error&) {
      ++counters_.skew_events;
      return;
    }
    apply_reliable(msg, from_peer);
  }

  void apply_reliable(const proto::ReliableMessage& msg, uint8_t from_peer) {
    std::visit([&](const auto& m) { apply(m, from_peer); }, msg);
  }

  // -- queries --------------------------------------------------------------

  const MeshSet& mesh() const { return mesh_; }
  const std::map<AnnotationKey, Annotation>& annotations() const { return annotations_; }
  const std::map<uint32_t, SharedObject>& objects() const { return objects_; }
  const std::map<uint16_t, Cutout>& cutouts() const { return cutouts_; }
  const std::map<uint32_t, ReplicaAsset>& replicas() const { return replicas_; }

  std::optional<proto::PointerDatagram> pointer_of(uint8_t peer) const {
    if (peer > 1 || !tracks_[peer].has) return std::nullopt;
    return tracks_[peer].last;
  }

  std::optional<uint16_t> active_cutout() const {
    for (const auto& [id, c] : cutouts_)
      if (c.active) return id;
    return std::nullopt;
  }

  const Cutout& cutout(uint16_t id) const {
    auto it = cutouts_.find(id);
    if (it == cutouts_.end()) throw Error(Errc::unknown_cutout, "unknown cutout");
    return it->second;
  }

  SimTransform map_cutout_pose_to_world(uint16_t id, const SimTransform& pose) const {
    return map_cutout_to_world(cutout(id), pose);
  }

  SimTransform map_world_pose_to_cutout(uint16_t id, const SimTransform& pose) const {
    return map_world_to_cutout(cutout(id), pose);
  }

  // Annotations drawn against a stale mesh snapshot are flagged for resync.
  bool needs_resync(const Annotation& a) const { return a.mesh_version != mesh_.version; }

  // Avatar placement for the VR user as seen in AR. With no active cutout the
  // avatar sits at the 360 camera with the head rotation only; with an active
  // cutout the head pose maps through the cutout back to the region's
  // physical location. Display scale is clamped to 1.
  SimTransform avatar_pose() const {
    SimTransform head;
    if (auto it = objects_.find(kHeadObjectId); it != objects_.end()) head = it->second.transform;

    const std::optional<uint16_t> active = active_cutout();
    if (active) {
      SimTransform pose = map_cutout_to_world(cutouts_.at(*active), head);
      pose.scale = 1.0;
      return pose;
    }
    const SimTransform camera = alignment_.inverse();
    return {camera.rotation * head.rotation, camera.translation, 1.0};
  }

  // Canonical shared-state dump: sorted keys, floats rounded to 6 decimals.
  // Contains only replicated state, so converged peers dump identical bytes.
  nlohmann::json dump_state() const;

 private:
  struct PointerTrack {
    bool has = false;
    proto::PointerDatagram last;
    std::optional<AnnotationKey> open_polyline;
  };

  static uint8_t quantize_color(double c) {
    return static_cast<uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
  }

  uint32_t allocate_object_id() {
    const uint32_t id = next_object_id_;
    next_object_id_ += 2;
    return id;
  }

  uint32_t next_object_seq(SharedObject& obj) {
    obj.last_sent_seq = std::max(obj.last_sent_seq, obj.last_seq) + 1;
    return obj.last_sent_seq;
  }

  SharedObject& require_object(uint32_t id) {
    auto it = objects_.find(id);
    if (it == objects_.end()) throw Error(Errc::unknown_object, "unknown object");
    return it->second;
  }

  Cutout& require_cutout(uint16_t id) {
    auto it = cutouts_.find(id);
    if (it == cutouts_.end()) throw Error(Errc::unknown_cutout, "unknown cutout");
    return it->second;
  }

  void send_datagram() {
    proto::PointerDatagram dg;
    dg.peer_id = peer_id_;
    dg.send_seq = ++send_seq_;
    dg.ray_origin = cur_origin_;
    dg.ray_direction = cur_direction_;
    dg.drawing_flag = drawing_ ? 1 : 0;
    dg.annotation_count = live_count_;
    uint16_t cutout = 0;
    if (role_ == Role::vr) {
      if (const auto active = active_cutout()) cutout = *active;
    }
    dg.active_cutout_id = cutout;
    out_unreliable_.push_back(proto::encode_pointer(dg));
  }

  void send_reliable(proto::ReliableMessage msg) {
    out_reliable_.push_back(proto::encode_reliable(msg));
  }

  uint32_t owner_annotation_count(uint8_t owner) const {
    uint32_t n = 0;
    for (const auto& [key, a] : annotations_)
      if (key.owner == owner) ++n;
    return n;
  }

  void delete_latest_of(uint8_t owner) {
    const AnnotationKey* latest = nullptr;
    for (const auto& [key, a] : annotations_)
      if (key.owner == owner && (!latest || key.ordinal > latest->ordinal)) latest = &key;
    if (!latest) {
      ++counters_.skew_events;
      return;
    }
    const AnnotationKey victim = *latest;
    annotations_.erase(victim);
    for (auto& track : tracks_)
      if (track.open_polyline == victim) track.open_polyline.reset();
  }

  // Resolves the datagram ray against the addressed space and appends the
  // world-space point. For an active cutout the ray is pulled back into the
  // source region, which lands the hit directly in world coordinates.
  void append_point(const proto::PointerDatagram& dg, PointerTrack& track) {
    Vec3 origin = proto::origin_vec(dg);
    Vec3 dir = proto::direction_unit(dg);

    const Cutout* cut = nullptr;
    if (dg.active_cutout_id != 0) {
      auto it = cutouts_.find(dg.active_cutout_id);
      if (it == cutouts_.end()) {
        ++counters_.skew_events;
        return;
      }
      cut = &it->second;
      const SimTransform to_source = cut->source_frame * cut->copy_frame.inverse();
      origin = to_source.apply(origin);
      dir = to_source.rotation.rotate(dir);
    }

    std::optional<RayHit> hit;
    if (cut) {
      hit = raycast(cut->source_mesh, origin, dir);
    } else {
      hit = raycast(mesh_, origin, dir);
    }
    // The pullback scales distances by 1/copy_scale, so the miss fallback
    // reach is scaled the same way to stay consistent across spaces.
    const double reach = cut ? kPointerReach / cut->copy_frame.scale : kPointerReach;
    const Vec3 point = hit ? hit->point : origin + dir * reach;

    if (!track.open_polyline) {
      AnnotationKey key{dg.peer_id, owner_annotation_count(dg.peer_id)};
      Annotation a;
      a.id = key;
      a.cutout_id = dg.active_cutout_id;
      a.attachment = dg.active_cutout_id != 0
                         ? Attachment::cutout_copy
                         : (hit ? Attachment::mesh_surface : Attachment::floating);
      a.mesh_version = mesh_.version;
      annotations_[key] = std::move(a);
      track.open_polyline = key;
    }
    annotations_[*track.open_polyline].points.push_back(point);
  }

  // -- reliable message application ----------------------------------------

  void apply(const proto::MeshChunkUpsert& m, uint8_t) {
    std::vector<MeshVertex> vertices;
    vertices.reserve(m.positions.size());
    for (size_t i = 0; i < m.positions.size(); ++i) {
      MeshVertex v;
      v.position = {m.positions[i][0], m.positions[i][1], m.positions[i][2]};
      if (m.colors) {
        const auto& c = (*m.colors)[i];
        v.color = Vec3{c[0] / 255.0, c[1] / 255.0, c[2] / 255.0};
      }
      vertices.push_back(v);
    }
    try {
      mesh_.upsert(make_triangle_mesh(m.chunk_id, std::move(vertices), m.triangles));
    } catch (const Error&) {
      ++counters_.skew_events;
    }
  }

  void apply(const proto::MeshChunkRemove& m, uint8_t) {
    if (!mesh_.remove(m.chunk_id)) ++counters_.unknown_targets;
  }

  void apply(const proto::ObjectSpawn& m, uint8_t) {
    if (objects_.contains(m.object_id)) {
      ++counters_.skew_events;
      return;
    }
    SharedObject obj;
    obj.id = m.object_id;
    obj.kind = m.kind;
    obj.transform = proto::from_wire(m.transform);
    obj.properties = m.properties;
    objects_[m.object_id] = obj;
  }

  void apply(const proto::ObjectTransform& m, uint8_t from_peer) {
    auto it = objects_.find(m.object_id);
    if (it == objects_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    SharedObject& obj = it->second;
    if (m.object_seq <= obj.last_seq) {
      ++counters_.stale_updates;
      return;
    }
    if (obj.held_by && *obj.held_by != from_peer) {
      ++counters_.grab_rejects;
      return;
    }
    const SimTransform t = proto::from_wire(m.transform);
    if (t.scale <= 0 || std::abs(t.rotation.norm() - 1.0) > 1e-3) {
      ++counters_.skew_events;
      return;
    }
    obj.transform = t;
    obj.last_seq = m.object_seq;
  }

  void apply(const proto::ObjectPropertyEdit& m, uint8_t from_peer) {
    auto it = objects_.find(m.object_id);
    if (it == objects_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    SharedObject& obj = it->second;
    if (m.object_seq <= obj.last_seq) {
      ++counters_.stale_updates;
      return;
    }
    if (obj.held_by && *obj.held_by != from_peer) {
      ++counters_.grab_rejects;
      return;
    }
    obj.properties = m.properties;
    obj.last_seq = m.object_seq;
  }

  void apply(const proto::ObjectGrab& m, uint8_t) {
    auto it = objects_.find(m.object_id);
    if (it == objects_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    SharedObject& obj = it->second;
    if (!obj.held_by || m.peer_id < *obj.held_by) {
      // Concurrent grabs resolve to the lower peer id on both sides
      // regardless of arrival order.
      obj.held_by = m.peer_id;
    } else if (*obj.held_by != m.peer_id) {
      ++counters_.grab_rejects;
    }
  }

  void apply(const proto::ObjectRelease& m, uint8_t) {
    auto it = objects_.find(m.object_id);
    if (it == objects_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    if (it->second.held_by == m.peer_id) {
      it->second.held_by.reset();
    } else {
      ++counters_.skew_events;
    }
  }

  void apply(const proto::ObjectDespawn& m, uint8_t) {
    if (objects_.erase(m.object_id) == 0) ++counters_.unknown_targets;
  }

  void apply(const proto::CutoutCreate& m, uint8_t) {
    if (m.cutout_id == 0 || cutouts_.contains(m.cutout_id)) {
      ++counters_.skew_events;
      return;
    }
    Cutout c;
    c.id = m.cutout_id;
    c.source_frame = proto::from_wire(m.source_frame);
    c.copy_frame = c.source_frame;
    try {
      const Vec3 apex{m.apex[0], m.apex[1], m.apex[2]};
      std::array<Vec3, 4> pts;
      for (int i = 0; i < 4; ++i) pts[i] = {m.points[i][0], m.points[i][1], m.points[i][2]};
      SelectionResult sel = select_triangles(mesh_, build_frustum(apex, pts));
      c.source_mesh = std::move(sel.mesh);
      c.provenance = std::move(sel.sources);
    } catch (const Error&) {
      ++counters_.skew_events;
      return;
    }
    cutouts_[m.cutout_id] = std::move(c);
    if (next_cutout_id_ <= m.cutout_id) next_cutout_id_ = m.cutout_id + 1;
  }

  void apply(const proto::CutoutTransform& m, uint8_t) {
    auto it = cutouts_.find(m.cutout_id);
    if (it == cutouts_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    const SimTransform t = proto::from_wire(m.copy_frame);
    if (t.scale <= 0 || std::abs(t.rotation.norm() - 1.0) > 1e-3) {
      ++counters_.skew_events;
      return;
    }
    it->second.copy_frame = t;
  }

  void apply(const proto::CutoutActivate& m, uint8_t) {
    if (!cutouts_.contains(m.cutout_id)) {
      ++counters_.unknown_targets;
      return;
    }
    // At most one active cutout.
    for (auto& [id, c] : cutouts_) c.active = id == m.cutout_id;
  }

  void apply(const proto::CutoutDeactivate& m, uint8_t) {
    auto it = cutouts_.find(m.cutout_id);
    if (it == cutouts_.end()) {
      ++counters_.unknown_targets;
      return;
    }
    it->second.active = false;
  }

  void apply(const proto::ReplicaMeshAnnounce& m, uint8_t) {
    ReplicaAsset asset;
    asset.id = m.replica_id;
    asset.obj_bytes = m.obj_bytes;
    try {
      const std::string text(m.obj_bytes.begin(), m.obj_bytes.end());
      asset.mesh = mesh_from_obj(parse_obj(text), 0);
    } catch (const Error&) {
      ++counters_.skew_events;
      return;
    }
    replicas_[m.replica_id] = std::move(asset);
  }

  uint8_t peer_id_;
  Role role_;
  SimTransform alignment_;  // peer space -> camera space

  MeshSet mesh_;
  std::map<AnnotationKey, Annotation> annotations_;
  std::map<uint32_t, SharedObject> objects_;
  std::map<uint16_t, Cutout> cutouts_;
  std::map<uint32_t, ReplicaAsset> replicas_;
  std::array<PointerTrack, 2> tracks_;

  // local sender state
  uint16_t send_seq_ = 0;
  bool drawing_ = false;
  uint8_t live_count_ = 0;
  int own_live_ = 0;
  std::array<float, 3> cur_origin_{};
  std::array<float, 3> cur_direction_{{0.f, 0.f, 1.f}};
  uint32_t next_object_id_ = 2;
  uint16_t next_cutout_id_ = 1;

  EngineCounters counters_;
  std::vector<std::vector<uint8_t>> out_unreliable_;
  std::vector<std::vector<uint8_t>> out_reliable_;
};

// ---------------------------------------------------------------------------
// Canonical JSON dump

namespace detail {

inline double round6(double x) {
  const double r = std::round(x * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // avoid -0
}

inline nlohmann::json vec_json(const Vec3& v) {
  return nlohmann::json::array({round6(v.x), round6(v.y), round6(v.z)});
}

inline nlohmann::json transform_json(const SimTransform& t) {
  return {{"rotation", nlohmann::json::array({round6(t.rotation.w), round6(t.rotation.x),
                                              round6(t.rotation.y), round6(t.rotation.z)})},
          {"translation", vec_json(t.translation)},
          {"scale", round6(t.scale)}};
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string mesh_hash(const TriangleMesh& m) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& v : m.vertices) {
    const float f[3] = {static_cast<float>(v.position.x), static_cast<float>(v.position.y),
                        static_cast<float>(v.position.z)};
    h = fnv1a(f, sizeof(f), h);
    if (v.color) {
      const uint8_t c[3] = {static_cast<uint8_t>(std::lround(v.color->x * 255)),
                            static_cast<uint8_t>(std::lround(v.color->y * 255)),
                            static_cast<uint8_t>(std::lround(v.color->z * 255))};
      h = fnv1a(c, sizeof(c), h);
    }
  }
  for (const auto& t : m.triangles) h = fnv1a(t.data(), sizeof(uint32_t) * 3, h);
  return hash_hex(h);
}

}  // namespace detail

inline nlohmann::json PeerEngine::dump_state() const {
  using nlohmann::json;
  json dump;

  json anns = json::object();
  for (const auto& [key, a] : annotations_) {
    json points = json::array();
    for (const Vec3& p : a.points) points.push_back(detail::vec_json(p));
    const char* attach = a.attachment == Attachment::floating
                             ? "floating"
                             : (a.attachment == Attachment::mesh_surface ? "mesh" : "cutout-copy");
    anns[std::to_string(key.owner) + ":" + std::to_string(key.ordinal)] = {
        {"attachment", attach},
        {"cutout", a.cutout_id},
        {"mesh_version", a.mesh_version},
        {"points", points}};
  }
  dump["annotations"] = anns;

  json cuts = json::object();
  for (const auto& [id, c] : cutouts_) {
    uint64_t ph = 0xcbf29ce484222325ull;
    for (const auto& ref : c.provenance) {
      ph = fnv1a(&ref.chunk_id, sizeof(ref.chunk_id), ph);
      ph = fnv1a(&ref.triangle, sizeof(ref.triangle), ph);
    }
    cuts[std::to_string(id)] = {{"active", c.active},
                                {"copy_frame", detail::transform_json(c.copy_frame)},
                                {"source_frame", detail::transform_json(c.source_frame)},
                                {"triangles", c.source_mesh.triangles.size()},
                                {"vertices", c.source_mesh.vertices.size()},
                                {"provenance", detail::hash_hex(ph)}};
  }
  dump["cutouts"] = cuts;

  json chunks = json::object();
  for (const auto& [id, m] : mesh_.chunks) {
    chunks[std::to_string(id)] = {{"vertices", m.vertices.size()},
                                  {"triangles", m.triangles.size()},
                                  {"hash", detail::mesh_hash(m)}};
  }
  dump["mesh"] = {{"chunks", chunks}, {"version", mesh_.version}};

  json objs = json::object();
  for (const auto& [id, o] : objects_) {
    json kind;
    if (const auto* prim = std::get_if<proto::PrimitiveKind>(&o.kind)) {
      kind = *prim == proto::PrimitiveKind::cube
                 ? "cube"
                 : (*prim == proto::PrimitiveKind::sphere ? "sphere" : "cylinder");
    } else {
      kind = {{"replica", std::get<proto::ReplicaRef>(o.kind).replica_id}};
    }
    objs[std::to_string(id)] = {
        {"kind", kind},
        {"transform", detail::transform_json(o.transform)},
        {"gravity", o.properties.gravity_enabled != 0},
        {"color", nlohmann::json::array({o.properties.material_color[0],
                                         o.properties.material_color[1],
                                         o.properties.material_color[2]})},
        {"scale", detail::round6(o.properties.uniform_scale)},
        {"seq", o.last_seq},
        {"held_by", o.held_by ? json(*o.held_by) : json(nullptr)}};
  }
  dump["objects"] = objs;

  json pointers = json::object();
  for (int peer = 0; peer < 2; ++peer) {
    if (!tracks_[peer].has) {
      pointers[std::to_string(peer)] = nullptr;
      continue;
    }
    const auto& d = tracks_[peer].last;
    pointers[std::to_string(peer)] = {
        {"seq", d.send_seq},
        {"origin", detail::vec_json(proto::origin_vec(d))},
        {"direction", nlohmann::json::array({detail::round6(d.ray_direction[0]),
                                             detail::round6(d.ray_direction[1]),
                                             detail::round6(d.ray_direction[2])})},
        {"drawing", d.drawing_flag},
        {"count", d.annotation_count},
        {"cutout", d.active_cutout_id}};
  }
  dump["pointers"] = pointers;

  json reps = json::object();
  for (const auto& [id, r] : replicas_) {
    reps[std::to_string(id)] = {
        {"bytes", r.obj_bytes.size()},
        {"hash", detail::hash_hex(fnv1a(r.obj_bytes.data(), r.obj_bytes.size()))}};
  }
  dump["replicas"] = reps;

  return dump;
}

}  // namespace nexus

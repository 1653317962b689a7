//! C ABI over `canyon-core`.
//!
//! Maps and trackers are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`CanyonStatus`]; on failure a message is kept per thread and can be
//! copied out with [`canyon_last_error`]. A tracker keeps its own reference
//! to the map, so the map handle may be freed first.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use canyon_core::filter::{FilterConfig, GnssFix, Tracker, VelocitySample};
use canyon_core::geomap::{self, GeoMapError, GeoPoint, GeoSegmentMap, SurfaceLabel};
use canyon_core::LocalPoint;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanyonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidMap = 5,
    NoSidewalks = 6,
    Filter = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanyonSurface {
    Impenetrable = 0,
    Street = 1,
    Traversable = 2,
}

/// Local east/north coordinates in meters.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CanyonPoint {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CanyonGeoPoint {
    pub lon: f64,
    pub lat: f64,
}

/// Mirrors the core filter config; see `canyon_config_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanyonConfig {
    pub n_particles: u32,
    pub pos_noise_sigma: f64,
    pub theta_noise_sigma: f64,
    pub jaywalk_weight: f64,
    pub gnss_sigma_scale: f64,
    pub gnss_radius_threshold: f64,
    pub init_pos_sigma: f64,
    pub init_theta_sigma: f64,
    pub seed: u64,
}

/// A GNSS fix in local coordinates.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanyonFix {
    pub position: CanyonPoint,
    pub uncertainty_radius: f64,
    pub timestamp: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CanyonEstimate {
    pub position: CanyonPoint,
    pub mean_theta: f64,
    pub effective_sample_size: f64,
    pub timestamp: f64,
    pub gnss_applied: bool,
    pub recovered: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CanyonParticle {
    pub position: CanyonPoint,
    pub theta: f64,
    pub weight: f64,
}

pub struct CanyonMap {
    inner: Arc<GeoSegmentMap>,
}

pub struct CanyonTracker {
    inner: Tracker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CanyonStatus, message: impl Into<String>) -> CanyonStatus {
    set_error(message);
    status
}

/// Runs `f`, turning a panic into `CanyonStatus::Panic`.
fn guard(f: impl FnOnce() -> CanyonStatus) -> CanyonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(CanyonStatus::Panic, "internal panic"),
    }
}

fn map_error(e: GeoMapError) -> CanyonStatus {
    let status = match e {
        GeoMapError::Io(_) => CanyonStatus::Io,
        GeoMapError::Parse(_) => CanyonStatus::Parse,
        GeoMapError::NoSidewalks => CanyonStatus::NoSidewalks,
        _ => CanyonStatus::InvalidMap,
    };
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, CanyonStatus> {
    if s.is_null() {
        return Err(fail(CanyonStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CanyonStatus::InvalidArgument, "string argument is not UTF-8"))
}

fn local(p: CanyonPoint) -> LocalPoint {
    LocalPoint::new(p.x, p.y)
}

fn point(p: LocalPoint) -> CanyonPoint {
    CanyonPoint { x: p.x, y: p.y }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to fit) and returns the full message length
/// including the terminator, or 0 when there is no error. `buf` may be
/// null to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn canyon_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn canyon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn map_out(result: Result<GeoSegmentMap, GeoMapError>, out: *mut *mut CanyonMap) -> CanyonStatus {
    match result {
        Ok(map) => {
            *out = Box::into_raw(Box::new(CanyonMap { inner: Arc::new(map) }));
            CanyonStatus::Ok
        }
        Err(e) => map_error(e),
    }
}

/// Loads a labeled GeoJSON map from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_load(path: *const c_char, out: *mut *mut CanyonMap) -> CanyonStatus {
    guard(|| {
        if out.is_null() {
            return fail(CanyonStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        map_out(geomap::load_map(path), out)
    })
}

/// Parses a labeled GeoJSON map from a string.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_from_geojson(text: *const c_char, out: *mut *mut CanyonMap) -> CanyonStatus {
    guard(|| {
        if out.is_null() {
            return fail(CanyonStatus::NullPointer, "out is null");
        }
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        map_out(geomap::parse_map(text), out)
    })
}

/// # Safety
/// `map` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_free(map: *mut CanyonMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_classify(
    map: *const CanyonMap,
    p: CanyonPoint,
    out: *mut CanyonSurface,
) -> CanyonStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return fail(CanyonStatus::NullPointer, "map or out is null");
        }
        *out = match (*map).inner.classify(local(p)) {
            SurfaceLabel::Impenetrable => CanyonSurface::Impenetrable,
            SurfaceLabel::Street => CanyonSurface::Street,
            SurfaceLabel::Traversable => CanyonSurface::Traversable,
        };
        CanyonStatus::Ok
    })
}

/// Nearest sidewalk to `p`. The id is copied NUL-terminated into `id_buf`
/// (`BufferTooSmall` if it doesn't fit); `projected` and `distance` may be
/// null.
///
/// # Safety
/// `map` must be a live handle; `id_buf` must be valid for `id_len` bytes;
/// non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_nearest_sidewalk(
    map: *const CanyonMap,
    p: CanyonPoint,
    id_buf: *mut c_char,
    id_len: usize,
    projected: *mut CanyonPoint,
    distance: *mut f64,
) -> CanyonStatus {
    guard(|| {
        if map.is_null() || id_buf.is_null() {
            return fail(CanyonStatus::NullPointer, "map or id_buf is null");
        }
        let hit = match (*map).inner.nearest_sidewalk(local(p)) {
            Ok(h) => h,
            Err(e) => return map_error(e),
        };
        let id = hit.id.as_bytes();
        if id.len() + 1 > id_len {
            return fail(
                CanyonStatus::BufferTooSmall,
                format!("sidewalk id needs {} bytes", id.len() + 1),
            );
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), id_buf, id.len());
        *id_buf.add(id.len()) = 0;
        if !projected.is_null() {
            *projected = point(hit.projected);
        }
        if !distance.is_null() {
            *distance = hit.distance;
        }
        CanyonStatus::Ok
    })
}

/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_to_local(
    map: *const CanyonMap,
    g: CanyonGeoPoint,
    out: *mut CanyonPoint,
) -> CanyonStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return fail(CanyonStatus::NullPointer, "map or out is null");
        }
        *out = point((*map).inner.projection().to_local(GeoPoint::new(g.lon, g.lat)));
        CanyonStatus::Ok
    })
}

/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_map_to_geo(
    map: *const CanyonMap,
    p: CanyonPoint,
    out: *mut CanyonGeoPoint,
) -> CanyonStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return fail(CanyonStatus::NullPointer, "map or out is null");
        }
        let g = (*map).inner.projection().to_geo(local(p));
        *out = CanyonGeoPoint {
            lon: g.longitude,
            lat: g.latitude,
        };
        CanyonStatus::Ok
    })
}

impl From<&FilterConfig> for CanyonConfig {
    fn from(c: &FilterConfig) -> Self {
        Self {
            n_particles: u32::try_from(c.n_particles).unwrap_or(u32::MAX),
            pos_noise_sigma: c.pos_noise_sigma,
            theta_noise_sigma: c.theta_noise_sigma,
            jaywalk_weight: c.jaywalk_weight,
            gnss_sigma_scale: c.gnss_sigma_scale,
            gnss_radius_threshold: c.gnss_radius_threshold,
            init_pos_sigma: c.init_pos_sigma,
            init_theta_sigma: c.init_theta_sigma,
            seed: c.seed,
        }
    }
}

impl From<&CanyonConfig> for FilterConfig {
    fn from(c: &CanyonConfig) -> Self {
        Self {
            n_particles: c.n_particles as usize,
            pos_noise_sigma: c.pos_noise_sigma,
            theta_noise_sigma: c.theta_noise_sigma,
            jaywalk_weight: c.jaywalk_weight,
            gnss_sigma_scale: c.gnss_sigma_scale,
            gnss_radius_threshold: c.gnss_radius_threshold,
            init_pos_sigma: c.init_pos_sigma,
            init_theta_sigma: c.init_theta_sigma,
            seed: c.seed,
        }
    }
}

#[no_mangle]
pub extern "C" fn canyon_config_default() -> CanyonConfig {
    (&FilterConfig::default()).into()
}

/// Creates a tracker at `start` (local meters). `heading_hint` is the known
/// rotation, radians, from the velocity frame to east/north. `config` may be
/// null for defaults.
///
/// # Safety
/// `map` must be a live handle; `config` null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_tracker_new(
    map: *const CanyonMap,
    start: CanyonPoint,
    heading_hint: f64,
    start_time: f64,
    config: *const CanyonConfig,
    out: *mut *mut CanyonTracker,
) -> CanyonStatus {
    guard(|| {
        if map.is_null() || out.is_null() {
            return fail(CanyonStatus::NullPointer, "map or out is null");
        }
        let config = if config.is_null() {
            FilterConfig::default()
        } else {
            (&*config).into()
        };
        match Tracker::new(Arc::clone(&(*map).inner), local(start), heading_hint, start_time, config) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(CanyonTracker { inner: t }));
                CanyonStatus::Ok
            }
            Err(e) => fail(CanyonStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Advances to `timestamp` with velocity `(vx, vy)` m/s, fusing `fix` when
/// non-null. The estimate is written to `out`.
///
/// # Safety
/// `tracker` must be a live handle; `fix` null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_tracker_step(
    tracker: *mut CanyonTracker,
    timestamp: f64,
    vx: f64,
    vy: f64,
    fix: *const CanyonFix,
    out: *mut CanyonEstimate,
) -> CanyonStatus {
    guard(|| {
        if tracker.is_null() || out.is_null() {
            return fail(CanyonStatus::NullPointer, "tracker or out is null");
        }
        let fix = (!fix.is_null()).then(|| {
            let f = &*fix;
            GnssFix {
                position: local(f.position),
                uncertainty_radius: f.uncertainty_radius,
                timestamp: f.timestamp,
            }
        });
        let v = VelocitySample {
            v: LocalPoint::new(vx, vy),
            timestamp,
        };
        match (*tracker).inner.step(&v, fix.as_ref()) {
            Ok(o) => {
                *out = CanyonEstimate {
                    position: point(o.estimate.position),
                    mean_theta: o.estimate.mean_theta,
                    effective_sample_size: o.estimate.effective_sample_size,
                    timestamp: o.estimate.timestamp,
                    gnss_applied: o.gnss_applied,
                    recovered: o.recovered,
                };
                CanyonStatus::Ok
            }
            Err(e) => fail(CanyonStatus::Filter, e.to_string()),
        }
    })
}

/// Copies up to `capacity` particles into `buf` and writes the total count
/// to `count`. Returns `BufferTooSmall` (after filling `buf`) when
/// `capacity` is short; `buf` may be null to query the count.
///
/// # Safety
/// `tracker` must be a live handle; `buf` null or valid for `capacity`
/// particles; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_tracker_particles(
    tracker: *const CanyonTracker,
    buf: *mut CanyonParticle,
    capacity: usize,
    count: *mut usize,
) -> CanyonStatus {
    guard(|| {
        if tracker.is_null() || count.is_null() {
            return fail(CanyonStatus::NullPointer, "tracker or count is null");
        }
        let particles = (*tracker).inner.particles().particles();
        *count = particles.len();
        if buf.is_null() {
            return CanyonStatus::Ok;
        }
        for (i, p) in particles.iter().take(capacity).enumerate() {
            *buf.add(i) = CanyonParticle {
                position: point(p.position),
                theta: p.theta,
                weight: p.weight,
            };
        }
        if capacity < particles.len() {
            return fail(
                CanyonStatus::BufferTooSmall,
                format!("{} particles, capacity {capacity}", particles.len()),
            );
        }
        CanyonStatus::Ok
    })
}

/// # Safety
/// `tracker` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn canyon_tracker_free(tracker: *mut CanyonTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

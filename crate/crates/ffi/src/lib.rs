//! C interface. Every function returns a [`FlowclStatus`]; on failure the
//! message is available from [`flowcl_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use flowcl::augment::{mask_view, MaskingConfig};
use flowcl::dataio::{read_csv, DatasetSchema, PreprocessorState};
use flowcl::eval::{confusion, metrics};
use flowcl::model::{preset_parameter_count, EncoderBlock, EncoderCheckpoint, ProjectionHead};
use flowcl::numgrad::Tensor;
use flowcl::sscl::batch_loss;
use flowcl::{rng, Error};

/// Result codes. Values 2 to 9 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Schema = 4,
    Parse = 5,
    InsufficientData = 6,
    NoSharedFeatures = 7,
    Numeric = 8,
    Shape = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Weighted-average classification metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowclMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A trained encoder with its projection head.
pub struct FlowclEncoder {
    encoder: EncoderBlock,
    projector: ProjectionHead,
}

/// A fitted preprocessor together with the schema it was fitted for.
pub struct FlowclPreprocessor {
    schema: DatasetSchema,
    state: PreprocessorState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FlowclStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => FlowclStatus::InvalidArgument,
            Error::Io { .. } => FlowclStatus::Io,
            Error::SchemaMismatch(_) | Error::UnknownClass(_) => FlowclStatus::Schema,
            Error::Parse { .. } | Error::Format { .. } => FlowclStatus::Parse,
            Error::InsufficientData(_) | Error::EmptyDataset | Error::MissingLabel(_) | Error::EmptyEvaluation => {
                FlowclStatus::InsufficientData
            }
            Error::NoSharedFeatures => FlowclStatus::NoSharedFeatures,
            Error::NonFiniteGradient(_) | Error::DegenerateVector => FlowclStatus::Numeric,
            Error::InvalidShape(_) | Error::InvalidLabel { .. } | Error::InvalidPair(..) | Error::InvalidBatch(_) => {
                FlowclStatus::Shape
            }
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FlowclStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FlowclStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlowclStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            FlowclStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FlowclStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < need {
        return Err(fail(
            FlowclStatus::BufferTooSmall,
            format!("{what} holds {len}, need {need}"),
        ));
    }
    if p.is_null() {
        return Err(fail(FlowclStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FlowclStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FlowclStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(fail(FlowclStatus::NullPointer, format!("{what} is null")));
    }
    p.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(FlowclStatus::NullPointer, format!("{what} is null")))
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn flowcl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn flowcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Trainable parameter count (encoder plus projection head) of a named preset.
///
/// # Safety
/// `preset` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_preset_parameter_count(preset: *const c_char, out: *mut u64) -> FlowclStatus {
    guard(|| {
        let n = preset_parameter_count(text(preset, "preset")?)?;
        write(out, n as u64, "out")
    })
}

/// Contrastive loss of `rows` latent vectors (row-major, `rows × cols`), where
/// rows `2k` and `2k + 1` are the two views of one sample.
///
/// # Safety
/// `z` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_batch_loss(
    z: *const f64,
    rows: usize,
    cols: usize,
    temperature: f64,
    out: *mut f64,
) -> FlowclStatus {
    guard(|| {
        let data = slice(z, rows * cols, "z")?;
        let t = Tensor::new(vec![rows, cols], data.to_vec())?;
        write(out, batch_loss(&t, temperature)?, "out")
    })
}

/// Weighted metrics of `n` predictions against labels in `0..classes`.
///
/// # Safety
/// `predictions` and `labels` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_metrics(
    predictions: *const usize,
    labels: *const usize,
    n: usize,
    classes: usize,
    out: *mut FlowclMetrics,
) -> FlowclStatus {
    guard(|| {
        let cm = confusion(
            slice(predictions, n, "predictions")?,
            slice(labels, n, "labels")?,
            classes,
        )?;
        let m = metrics(&cm)?;
        let value = FlowclMetrics {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        write(out, value, "out")
    })
}

/// One masked view of `x`: `round(ratio * width)` positions set to zero.
/// The positions depend only on `seed` and `draw`.
///
/// # Safety
/// `x` and `out` must each point to `width` doubles.
#[no_mangle]
pub unsafe extern "C" fn flowcl_mask_view(
    x: *const f64,
    width: usize,
    ratio: f64,
    seed: u64,
    draw: u64,
    out: *mut f64,
) -> FlowclStatus {
    guard(|| {
        let input = slice(x, width, "x")?;
        let cfg = MaskingConfig::new(ratio, seed)?;
        let view = mask_view(input, &cfg, &mut rng::keyed(seed, rng::AUGMENT, &[draw]));
        out_slice(out, width, width, "out")?.copy_from_slice(&view);
        Ok(())
    })
}

/// Load an encoder checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable. The
/// handle written to `out` must be released with `flowcl_encoder_free`.
#[no_mangle]
pub unsafe extern "C" fn flowcl_encoder_load(path: *const c_char, out: *mut *mut FlowclEncoder) -> FlowclStatus {
    guard(|| {
        let ckpt = EncoderCheckpoint::load(Path::new(text(path, "path")?))?;
        let boxed = Box::new(FlowclEncoder {
            encoder: ckpt.encoder,
            projector: ckpt.projector,
        });
        if out.is_null() {
            return Err(fail(FlowclStatus::NullPointer, "out is null"));
        }
        out.write(Box::into_raw(boxed));
        Ok(())
    })
}

/// Release an encoder handle. Null is ignored.
///
/// # Safety
/// `encoder` must come from `flowcl_encoder_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flowcl_encoder_free(encoder: *mut FlowclEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Input width, hidden width and context width of a loaded encoder.
///
/// # Safety
/// `encoder` must be a live handle; each non-null output must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_encoder_dims(
    encoder: *const FlowclEncoder,
    input_width: *mut usize,
    hidden_dim: *mut usize,
    context_dim: *mut usize,
) -> FlowclStatus {
    guard(|| {
        let e = handle(encoder, "encoder")?;
        for (p, v) in [
            (input_width, e.encoder.input_width()),
            (hidden_dim, e.encoder.hidden_dim()),
            (context_dim, e.projector.context_dim()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Hidden representations of `rows` inputs (row-major `rows × input_width`)
/// into `out` (`rows × hidden_dim`). Eval mode; the handle is not modified.
///
/// # Safety
/// `x` must point to `rows * width` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn flowcl_encoder_encode(
    encoder: *const FlowclEncoder,
    x: *const f64,
    rows: usize,
    width: usize,
    out: *mut f64,
    out_len: usize,
) -> FlowclStatus {
    guard(|| {
        let e = handle(encoder, "encoder")?;
        let input = Tensor::new(vec![rows, width], slice(x, rows * width, "x")?.to_vec())?;
        let h = e.encoder.encode(&input)?;
        out_slice(out, out_len, h.len(), "out")?.copy_from_slice(h.data());
        Ok(())
    })
}

/// Context vectors for `rows` hidden representations (`rows × hidden_dim`)
/// into `out` (`rows × context_dim`).
///
/// # Safety
/// `h` must point to `rows * hidden_dim` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn flowcl_encoder_project(
    encoder: *const FlowclEncoder,
    h: *const f64,
    rows: usize,
    out: *mut f64,
    out_len: usize,
) -> FlowclStatus {
    guard(|| {
        let e = handle(encoder, "encoder")?;
        let dim = e.projector.hidden_dim();
        let input = Tensor::new(vec![rows, dim], slice(h, rows * dim, "h")?.to_vec())?;
        let z = e.projector.project(&input)?;
        out_slice(out, out_len, z.len(), "out")?.copy_from_slice(z.data());
        Ok(())
    })
}

/// Load a fitted preprocessor. `schema` is a schema file or `builtin:<name>`;
/// it must be the schema the state was fitted for.
///
/// # Safety
/// `schema` and `state_path` must be NUL-terminated strings; `out` must be
/// writable. Release the handle with `flowcl_preprocessor_free`.
#[no_mangle]
pub unsafe extern "C" fn flowcl_preprocessor_load(
    schema: *const c_char,
    state_path: *const c_char,
    out: *mut *mut FlowclPreprocessor,
) -> FlowclStatus {
    guard(|| {
        let schema = DatasetSchema::load(Path::new(text(schema, "schema")?))?;
        let state = PreprocessorState::load(Path::new(text(state_path, "state_path")?))?;
        state.check_schema(&schema)?;
        if out.is_null() {
            return Err(fail(FlowclStatus::NullPointer, "out is null"));
        }
        out.write(Box::into_raw(Box::new(FlowclPreprocessor { schema, state })));
        Ok(())
    })
}

/// Release a preprocessor handle. Null is ignored.
///
/// # Safety
/// `pre` must come from `flowcl_preprocessor_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flowcl_preprocessor_free(pre: *mut FlowclPreprocessor) {
    if !pre.is_null() {
        drop(Box::from_raw(pre));
    }
}

/// Encoded width produced by the preprocessor.
///
/// # Safety
/// `pre` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_preprocessor_width(pre: *const FlowclPreprocessor, out: *mut usize) -> FlowclStatus {
    guard(|| write(out, handle(pre, "preprocessor")?.state.width(), "out"))
}

/// Encode CSV text laid out as the schema expects (header row unless the
/// schema fixes the columns). Writes `rows × width` values to `out` and the
/// row count to `rows`. Labels are ignored.
///
/// # Safety
/// `csv` must be a NUL-terminated string, `out` must point to `out_len`
/// doubles, and `rows` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowcl_preprocessor_transform_csv(
    pre: *const FlowclPreprocessor,
    csv: *const c_char,
    out: *mut f64,
    out_len: usize,
    rows: *mut usize,
) -> FlowclStatus {
    guard(|| {
        let p = handle(pre, "preprocessor")?;
        let records = read_csv(text(csv, "csv")?.as_bytes(), &p.schema)?;
        let (samples, _) = p.state.transform_all(&records);
        let width = p.state.width();
        let dst = out_slice(out, out_len, samples.len() * width, "out")?;
        for (chunk, s) in dst.chunks_exact_mut(width.max(1)).zip(&samples) {
            chunk.copy_from_slice(&s.features);
        }
        write(rows, samples.len(), "rows")
    })
}

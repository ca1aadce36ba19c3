//! C ABI over `cegmix`.
//!
//! Every fallible call returns a [`CegmixStatus`]. On failure the message is
//! kept per thread and read with [`cegmix_last_error`]. Handles are opaque and
//! owned by the caller once returned; release them with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cegmix::ahc::{ahc_cluster, exact_partition_search};
use cegmix::conjugate::{log_marginal_binomial, ConjugatePrior};
use cegmix::data::{Dataset, HoldingData, TransitionData};
use cegmix::metrics;
use cegmix::mixture::{Family, MixtureData};
use cegmix::partition::Partition;
use cegmix::search::{select_clusters, MixturePriors, SearchConfig, SearchResult};
use cegmix::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CegmixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Data or partition failed validation.
    InvalidInput = 3,
    /// Sampler or estimator failure.
    Numerical = 4,
    Io = 5,
    Parse = 6,
    /// Output buffer too small; the required length is still written.
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CegmixDataKind {
    Transitions = 0,
    Holding = 1,
}

pub struct CegmixDataset(Dataset);
pub struct CegmixPartition(Partition);
pub struct CegmixSearchResult(SearchResult);

/// Settings for [`cegmix_select_clusters`]. Start from
/// [`cegmix_search_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CegmixSearchOptions {
    pub k_max: usize,
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub seed: u64,
    /// Known Weibull scale; ignored for transition data.
    pub weibull_scale: f64,
    /// Gamma prior on the Weibull shape.
    pub shape_prior_shape: f64,
    pub shape_prior_rate: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CegmixStatus {
    match e {
        Error::Io(_) => CegmixStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::Parse(_) => CegmixStatus::Parse,
        Error::DivergencePersistent { .. }
        | Error::NonFiniteDensity { .. }
        | Error::InsufficientDraws { .. }
        | Error::ProposalDegenerate
        | Error::SearchAborted(_) => CegmixStatus::Numerical,
        Error::InvalidPrior(_) | Error::InvalidConfig(_) | Error::InfeasibleConfig(_) => {
            CegmixStatus::InvalidArgument
        }
        _ => CegmixStatus::InvalidInput,
    }
}

struct Fail(CegmixStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CegmixStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CegmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CegmixStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CegmixStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn utf8_path(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(String::from)
        .map_err(|_| Fail(CegmixStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cegmix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cegmix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Transition counts for `n` situations, with ids `s0, s1, ...`.
///
/// # Safety
/// `successes` and `trials` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_transitions_new(
    successes: *const u64,
    trials: *const u64,
    n: usize,
    out: *mut *mut CegmixDataset,
) -> CegmixStatus {
    guard(|| {
        let s = slice(successes, n, "successes")?;
        let t = slice(trials, n, "trials")?;
        let counts: Vec<(u64, u64)> = s.iter().copied().zip(t.iter().copied()).collect();
        let d = TransitionData::from_counts(&counts)?;
        write(out, boxed(CegmixDataset(d.into())), "out")
    })
}

/// Holding times for `n_edges` edges, ids `e0, e1, ...`. Edge `i` owns the
/// next `lengths[i]` values of `times`.
///
/// # Safety
/// `lengths` must hold `n_edges` values and `times` their sum.
#[no_mangle]
pub unsafe extern "C" fn cegmix_holding_new(
    times: *const f64,
    lengths: *const usize,
    n_edges: usize,
    out: *mut *mut CegmixDataset,
) -> CegmixStatus {
    guard(|| {
        let lengths = slice(lengths, n_edges, "lengths")?;
        let total = lengths
            .iter()
            .try_fold(0usize, |a, &l| a.checked_add(l))
            .ok_or_else(|| Fail(CegmixStatus::InvalidArgument, "lengths overflow".into()))?;
        let flat = slice(times, total, "times")?;
        let mut at = 0;
        let per_edge = lengths
            .iter()
            .map(|&l| {
                let v = flat[at..at + l].to_vec();
                at += l;
                v
            })
            .collect();
        let d = HoldingData::from_times(per_edge)?;
        write(out, boxed(CegmixDataset(d.into())), "out")
    })
}

/// Reads a dataset CSV; `kind` is a [`CegmixDataKind`] value.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_dataset_read_csv(
    path: *const c_char,
    kind: u32,
    out: *mut *mut CegmixDataset,
) -> CegmixStatus {
    guard(|| {
        let holding = match kind {
            k if k == CegmixDataKind::Transitions as u32 => false,
            k if k == CegmixDataKind::Holding as u32 => true,
            k => return Err(Fail(CegmixStatus::InvalidArgument, format!("unknown data kind {k}"))),
        };
        let reader = BufReader::new(File::open(utf8_path(path)?).map_err(Error::from)?);
        let d: Dataset = if holding {
            HoldingData::read_csv(reader)?.into()
        } else {
            TransitionData::read_csv(reader)?.into()
        };
        write(out, boxed(CegmixDataset(d)), "out")
    })
}

/// # Safety
/// `data` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_dataset_len(data: *const CegmixDataset, out: *mut usize) -> CegmixStatus {
    guard(|| write(out, reference(data, "data")?.0.len(), "out"))
}

/// # Safety
/// `data` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cegmix_dataset_free(data: *mut CegmixDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Partition of a dataset's units from cluster tags, one per unit.
///
/// # Safety
/// `labels` must hold as many values as the dataset has units.
#[no_mangle]
pub unsafe extern "C" fn cegmix_partition_new(
    data: *const CegmixDataset,
    labels: *const usize,
    n: usize,
    out: *mut *mut CegmixPartition,
) -> CegmixStatus {
    guard(|| {
        let d = reference(data, "data")?;
        let labels = slice(labels, n, "labels")?;
        let p = Partition::from_labels(d.0.ids(), labels)?;
        write(out, boxed(CegmixPartition(p)), "out")
    })
}

/// # Safety
/// `p` must be a live partition handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_partition_size(
    p: *const CegmixPartition,
    units: *mut usize,
    blocks: *mut usize,
) -> CegmixStatus {
    guard(|| {
        let p = reference(p, "partition")?;
        write(units, p.0.len(), "units")?;
        write(blocks, p.0.k(), "blocks")
    })
}

/// Copies block labels, numbered by first appearance, into `buf`.
///
/// # Safety
/// `buf` must hold `cap` values; `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_partition_labels(
    p: *const CegmixPartition,
    buf: *mut usize,
    cap: usize,
    needed: *mut usize,
) -> CegmixStatus {
    guard(|| {
        let labels = reference(p, "partition")?.0.canonical_labels();
        write(needed, labels.len(), "needed")?;
        if cap < labels.len() {
            return Err(Fail(CegmixStatus::BufferTooSmall, format!("need {} slots", labels.len())));
        }
        if !labels.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(labels.as_ptr(), buf, labels.len());
        }
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cegmix_partition_free(p: *mut CegmixPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Closed-form Beta-Binomial log evidence of a pooled cluster.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_log_marginal_binomial(
    successes: u64,
    trials: u64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> CegmixStatus {
    guard(|| write(out, log_marginal_binomial(successes, trials, alpha, beta)?, "out"))
}

unsafe fn cluster(
    data: *const CegmixDataset,
    prior: ConjugatePrior,
    exact: bool,
    out: *mut *mut CegmixPartition,
    log_score: *mut f64,
) -> Result<(), Fail> {
    let d = &reference(data, "data")?.0;
    prior.validate()?;
    let (p, s) = if exact {
        let r = exact_partition_search(d, &prior)?;
        (r.partition, r.log_score)
    } else {
        let r = ahc_cluster(d, &prior)?;
        (r.partition, r.log_score)
    };
    if !log_score.is_null() {
        log_score.write(s);
    }
    write(out, boxed(CegmixPartition(p)), "out")
}

/// Greedy agglomerative clustering of transition data under Beta(`alpha`, `beta`).
/// `log_score` may be null.
///
/// # Safety
/// `data` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_ahc_binomial(
    data: *const CegmixDataset,
    alpha: f64,
    beta: f64,
    out: *mut *mut CegmixPartition,
    log_score: *mut f64,
) -> CegmixStatus {
    guard(|| cluster(data, ConjugatePrior::BetaBinomial { alpha, beta }, false, out, log_score))
}

/// Greedy clustering of holding data with a known Weibull shape and a
/// Gamma(`prior_shape`, `prior_rate`) prior on the Weibull rate.
///
/// # Safety
/// As for [`cegmix_ahc_binomial`].
#[no_mangle]
pub unsafe extern "C" fn cegmix_ahc_weibull(
    data: *const CegmixDataset,
    shape: f64,
    prior_shape: f64,
    prior_rate: f64,
    out: *mut *mut CegmixPartition,
    log_score: *mut f64,
) -> CegmixStatus {
    let prior = ConjugatePrior::GammaWeibullKnownShape { shape, prior_shape, prior_rate };
    guard(|| cluster(data, prior, false, out, log_score))
}

/// Best partition over all set partitions of at most 10 transition units.
///
/// # Safety
/// As for [`cegmix_ahc_binomial`].
#[no_mangle]
pub unsafe extern "C" fn cegmix_exact_binomial(
    data: *const CegmixDataset,
    alpha: f64,
    beta: f64,
    out: *mut *mut CegmixPartition,
    log_score: *mut f64,
) -> CegmixStatus {
    guard(|| cluster(data, ConjugatePrior::BetaBinomial { alpha, beta }, true, out, log_score))
}

/// # Safety
/// Both partitions must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_nmi(
    pred: *const CegmixPartition,
    truth: *const CegmixPartition,
    out: *mut f64,
) -> CegmixStatus {
    guard(|| {
        let v = metrics::nmi(&reference(pred, "pred")?.0, &reference(truth, "truth")?.0)?;
        write(out, v, "out")
    })
}

/// # Safety
/// Both partitions must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_rand_index(
    pred: *const CegmixPartition,
    truth: *const CegmixPartition,
    out: *mut f64,
) -> CegmixStatus {
    guard(|| {
        let v = metrics::rand_index(&reference(pred, "pred")?.0, &reference(truth, "truth")?.0)?;
        write(out, v, "out")
    })
}

#[no_mangle]
pub extern "C" fn cegmix_search_options_default() -> CegmixSearchOptions {
    let s = SearchConfig::default();
    let cegmix::mixture::ComponentPrior::Gamma { shape, rate } = MixturePriors::weibull().component_prior else {
        unreachable!("the Weibull default is a Gamma prior")
    };
    CegmixSearchOptions {
        k_max: s.k_max,
        chains: s.sampler.chains,
        warmup: s.sampler.warmup,
        samples: s.sampler.samples,
        seed: s.sampler.seed,
        weibull_scale: 1.0,
        shape_prior_shape: shape,
        shape_prior_rate: rate,
    }
}

/// Mixture model search over the number of clusters. Binomial for
/// transition data, known-scale Weibull for holding data.
///
/// # Safety
/// `data` must be live; `options` may be null for defaults; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_select_clusters(
    data: *const CegmixDataset,
    options: *const CegmixSearchOptions,
    out: *mut *mut CegmixSearchResult,
) -> CegmixStatus {
    guard(|| {
        let d = &reference(data, "data")?.0;
        let o = options.as_ref().copied().unwrap_or_else(|| cegmix_search_options_default());
        let mut config = SearchConfig { k_max: o.k_max, ..Default::default() };
        config.sampler.chains = o.chains;
        config.sampler.warmup = o.warmup;
        config.sampler.samples = o.samples;
        config.sampler.seed = o.seed;
        config.bridge.seed = o.seed;
        config.sampler.validate()?;
        let result = match d {
            Dataset::Transitions(t) => {
                select_clusters(MixtureData::Situations(t), Family::Binomial, &MixturePriors::binomial(), &config, None)?
            }
            Dataset::Holding(h) => {
                let mut priors = MixturePriors::weibull();
                priors.component_prior = cegmix::mixture::ComponentPrior::Gamma {
                    shape: o.shape_prior_shape,
                    rate: o.shape_prior_rate,
                };
                let family = Family::WeibullKnownScale { scale: o.weibull_scale };
                select_clusters(MixtureData::Edges(h), family, &priors, &config, None)?
            }
        };
        write(out, boxed(CegmixSearchResult(result)), "out")
    })
}

/// # Safety
/// `r` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_search_result_k(r: *const CegmixSearchResult, out: *mut usize) -> CegmixStatus {
    guard(|| write(out, reference(r, "result")?.0.k_selected, "out"))
}

/// Copies the selected partition into a new handle.
///
/// # Safety
/// `r` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_search_result_partition(
    r: *const CegmixSearchResult,
    out: *mut *mut CegmixPartition,
) -> CegmixStatus {
    guard(|| {
        let p = reference(r, "result")?.0.partition.clone();
        write(out, boxed(CegmixPartition(p)), "out")
    })
}

/// Full result as JSON. Release the string with [`cegmix_string_free`].
///
/// # Safety
/// `r` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cegmix_search_result_json(r: *const CegmixSearchResult, out: *mut *mut c_char) -> CegmixStatus {
    guard(|| {
        let text = serde_json::to_string(&reference(r, "result")?.0).map_err(Error::from)?;
        let c = CString::new(text).map_err(|e| Fail(CegmixStatus::Panic, e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cegmix_search_result_free(r: *mut CegmixSearchResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cegmix_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

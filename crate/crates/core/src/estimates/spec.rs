//! Declarations of value estimates: what is predicted, from which inputs,
//! how far ahead, and which observations count as training data.

use std::fmt;
use std::sync::Arc;

use super::EstimateError;
use crate::model::{ComponentId, ComponentInstance, Population, Time, TypeHandle};

pub const MINUTES_PER_DAY: Time = 1440;

/// Offsets `T+<min,max>` an estimate must cover, in clock ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Horizon {
    min: u32,
    max: u32,
}

impl Horizon {
    pub fn new(min: u32, max: u32) -> Result<Self, EstimateError> {
        if min == 0 || min > max {
            return Err(EstimateError::InvalidHorizon { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> u32 {
        self.min
    }

    pub fn max(&self) -> u32 {
        self.max
    }

    pub fn contains(&self, t: u32) -> bool {
        (self.min..=self.max).contains(&t)
    }

    /// Offset mapped linearly onto [0, 1].
    pub fn encode(&self, t: u32) -> f64 {
        if self.max == self.min {
            0.0
        } else {
            (t as f64 - self.min as f64) / (self.max - self.min) as f64
        }
    }

    pub fn clamp(&self, t: i64) -> u32 {
        t.clamp(self.min as i64, self.max as i64) as u32
    }
}

/// Where an estimate lives. Ensembles are identified by the component bound
/// to one of their static roles (the anchor).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    Component {
        component_type: TypeHandle,
    },
    Ensemble {
        anchor_type: TypeHandle,
    },
    ComponentEnsemblePair {
        component_type: TypeHandle,
        anchor_type: TypeHandle,
    },
}

/// Identity of one attachment context, stable across ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey {
    pub component: Option<ComponentId>,
    pub anchor: Option<ComponentId>,
}

/// State visible to extractors, guards and outputs.
#[derive(Clone, Copy)]
pub struct AttachmentContext<'a> {
    pub population: &'a Population,
    pub now: Time,
    pub component: Option<&'a ComponentInstance>,
    pub anchor: Option<&'a ComponentInstance>,
}

impl<'a> AttachmentContext<'a> {
    pub fn key(&self) -> ContextKey {
        ContextKey {
            component: self.component.map(|c| c.id()),
            anchor: self.anchor.map(|c| c.id()),
        }
    }

    /// Day index 0..7 of the clock (0 is the first simulated day of a week).
    pub fn day_of_week(&self) -> usize {
        self.now.div_euclid(MINUTES_PER_DAY).rem_euclid(7) as usize
    }
}

pub type Extract = Arc<dyn Fn(&AttachmentContext<'_>, &mut Vec<f64>) + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&AttachmentContext<'_>) -> bool + Send + Sync>;
pub type ReadOutput = Arc<dyn Fn(&AttachmentContext<'_>) -> Option<f64> + Send + Sync>;

/// A named input extractor writing `width` numbers.
#[derive(Clone)]
pub struct Feature {
    pub name: String,
    pub width: usize,
    /// Standardize with statistics frozen at first training.
    pub standardize: bool,
    extract: Extract,
}

impl fmt::Debug for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Feature")
            .field("name", &self.name)
            .field("width", &self.width)
            .field("standardize", &self.standardize)
            .finish()
    }
}

impl Feature {
    pub fn new<F>(name: &str, width: usize, standardize: bool, extract: F) -> Self
    where
        F: Fn(&AttachmentContext<'_>, &mut Vec<f64>) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            width,
            standardize,
            extract: Arc::new(extract),
        }
    }

    /// One-hot day of week (7 values).
    pub fn day_of_week() -> Self {
        Self::new("dayOfWeek", 7, false, |ctx, out| {
            let d = ctx.day_of_week();
            out.extend((0..7).map(|i| if i == d { 1.0 } else { 0.0 }));
        })
    }

    /// A numeric or boolean field of the attached component.
    pub fn component_field(field: &str) -> Self {
        let name = field.to_string();
        Self::new(field, 1, true, move |ctx, out| {
            let v = ctx.component.and_then(|c| c.get(&name)).and_then(|v| {
                v.as_number()
                    .or_else(|| v.as_bool().map(|b| b as u8 as f64))
            });
            out.push(v.unwrap_or(f64::NAN));
        })
    }

    pub(crate) fn extract(&self, ctx: &AttachmentContext<'_>, out: &mut Vec<f64>) {
        let before = out.len();
        (self.extract)(ctx, out);
        debug_assert_eq!(
            out.len() - before,
            self.width,
            "feature {} width",
            self.name
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Binary,
    Categorical(usize),
    Continuous,
}

impl OutputKind {
    pub fn outputs(&self) -> usize {
        match self {
            OutputKind::Categorical(k) => *k,
            _ => 1,
        }
    }
}

/// The future value an estimate predicts.
#[derive(Clone)]
pub struct Output {
    pub attribute: String,
    pub kind: OutputKind,
    read: ReadOutput,
}

impl fmt::Debug for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Output")
            .field("attribute", &self.attribute)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Output {
    /// `read` returns `None` when the value is unreadable; such contexts are skipped.
    pub fn new<F>(attribute: &str, kind: OutputKind, read: F) -> Self
    where
        F: Fn(&AttachmentContext<'_>) -> Option<f64> + Send + Sync + 'static,
    {
        Self {
            attribute: attribute.into(),
            kind,
            read: Arc::new(read),
        }
    }

    /// Reads a field of the attached component: booleans map to 0/1, numbers
    /// and times as is.
    pub fn component_field(field: &str, kind: OutputKind) -> Self {
        let name = field.to_string();
        Self::new(field, kind, move |ctx| {
            let v = ctx.component?.get(&name)?;
            v.as_bool()
                .map(|b| b as u8 as f64)
                .or_else(|| v.as_number())
                .or_else(|| v.as_time().map(|t| t as f64))
        })
    }

    pub(crate) fn read(&self, ctx: &AttachmentContext<'_>) -> Option<f64> {
        (self.read)(ctx)
    }
}

/// Declaration of a supervised prediction of a future attribute value.
#[derive(Clone)]
pub struct ValueEstimate {
    pub name: String,
    pub attachment: Attachment,
    pub inputs: Vec<Feature>,
    pub output: Output,
    pub horizon: Horizon,
    guard: Predicate,
    record_when: Option<Predicate>,
}

impl fmt::Debug for ValueEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueEstimate")
            .field("name", &self.name)
            .field("attachment", &self.attachment)
            .field("inputs", &self.inputs)
            .field("output", &self.output)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ValueEstimate {
    pub fn new(name: &str, attachment: Attachment, output: Output, horizon: Horizon) -> Self {
        Self {
            name: name.into(),
            attachment,
            inputs: Vec::new(),
            output,
            horizon,
            guard: Arc::new(|_| true),
            record_when: None,
        }
    }

    pub fn input(mut self, feature: Feature) -> Self {
        self.inputs.push(feature);
        self
    }

    pub fn guard<F>(mut self, f: F) -> Self
    where
        F: Fn(&AttachmentContext<'_>) -> bool + Send + Sync + 'static,
    {
        self.guard = Arc::new(f);
        self
    }

    /// Restricts which input snapshots are buffered. Lets an estimate learn a
    /// conditional quantity, e.g. arrival given the worker is still absent.
    pub fn record_inputs_when<F>(mut self, f: F) -> Self
    where
        F: Fn(&AttachmentContext<'_>) -> bool + Send + Sync + 'static,
    {
        self.record_when = Some(Arc::new(f));
        self
    }

    /// Input width without the encoded horizon.
    pub fn input_width(&self) -> usize {
        self.inputs.iter().map(|f| f.width).sum()
    }

    /// Width of a training example's input vector (inputs plus encoded horizon).
    pub fn feature_count(&self) -> usize {
        self.input_width() + 1
    }

    /// Which of the `feature_count()` features are standardized.
    pub fn standardized_mask(&self) -> Vec<bool> {
        let mut mask: Vec<bool> = self
            .inputs
            .iter()
            .flat_map(|f| std::iter::repeat_n(f.standardize, f.width))
            .collect();
        mask.push(false);
        mask
    }

    pub fn passes_guard(&self, ctx: &AttachmentContext<'_>) -> bool {
        (self.guard)(ctx)
    }

    pub fn records_inputs(&self, ctx: &AttachmentContext<'_>) -> bool {
        self.record_when.as_ref().is_none_or(|f| f(ctx))
    }

    pub fn extract_inputs(&self, ctx: &AttachmentContext<'_>, out: &mut Vec<f64>) {
        for f in &self.inputs {
            f.extract(ctx, out);
        }
    }

    pub fn read_output(&self, ctx: &AttachmentContext<'_>) -> Option<f64> {
        self.output.read(ctx)
    }

    /// Every attachment context present in `population`, in ascending key order.
    pub fn contexts<'a>(
        &self,
        population: &'a Population,
        now: Time,
    ) -> Vec<AttachmentContext<'a>> {
        let ctx = |component, anchor| AttachmentContext {
            population,
            now,
            component,
            anchor,
        };
        match self.attachment {
            Attachment::Component { component_type } => population
                .of_type(component_type)
                .map(|c| ctx(Some(c), None))
                .collect(),
            Attachment::Ensemble { anchor_type } => population
                .of_type(anchor_type)
                .map(|a| ctx(None, Some(a)))
                .collect(),
            Attachment::ComponentEnsemblePair {
                component_type,
                anchor_type,
            } => population
                .of_type(component_type)
                .flat_map(|c| population.of_type(anchor_type).map(move |a| (c, a)))
                .map(|(c, a)| ctx(Some(c), Some(a)))
                .collect(),
        }
    }

    /// Context for a specific (component, anchor) pair, if both exist.
    pub fn context<'a>(
        &self,
        population: &'a Population,
        now: Time,
        component: Option<ComponentId>,
        anchor: Option<ComponentId>,
    ) -> AttachmentContext<'a> {
        AttachmentContext {
            population,
            now,
            component: component.and_then(|id| population.get(id)),
            anchor: anchor.and_then(|id| population.get(id)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_bounds() {
        assert!(Horizon::new(0, 3).is_err());
        assert!(Horizon::new(4, 3).is_err());
        let h = Horizon::new(1, 30).unwrap();
        assert_eq!(h.encode(1), 0.0);
        assert_eq!(h.encode(30), 1.0);
        assert_eq!(h.clamp(45), 30);
        assert_eq!(h.clamp(-2), 1);
        assert_eq!(Horizon::new(5, 5).unwrap().encode(5), 0.0);
    }
}

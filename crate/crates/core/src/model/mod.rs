//! Component and ensemble metamodel plus the resolution runtime.

mod component;
pub(crate) mod ensemble;
mod resolve;

pub use component::{
    ComponentId, ComponentInstance, ComponentType, FieldKind, Population, Position, Time,
    TypeHandle, TypeRegistry, Value,
};
pub use ensemble::{
    ActionKind, ActionSpec, Cardinality, DynamicRoleSpec, EnsembleType, Membership, ResourceRef,
    RoleContext, SelectCost, Selection, Situation, StaticRoleSpec,
};
pub use resolve::{
    EnsembleInstance, EnsembleRuntime, EnsembleSet, InstanceKey, Notification, Permission,
    PermissionSet, Resolution, StepOutcome,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("component type `{0}` is already registered")]
    DuplicateType(String),
    #[error("ensemble type `{0}` is already registered")]
    DuplicateEnsemble(String),
    #[error("type `{type_name}` declares field `{field}` more than once")]
    DuplicateField { type_name: String, field: String },
    #[error("type `{type_name}` has no field `{field}`")]
    UnknownField { type_name: String, field: String },
    #[error("component of type `{type_name}` is missing field `{field}`")]
    MissingField { type_name: String, field: String },
    #[error("field `{type_name}.{field}` expects {expected:?}, got {found:?}")]
    FieldKindMismatch {
        type_name: String,
        field: String,
        expected: FieldKind,
        found: FieldKind,
    },
    #[error("component id {0} is already in use")]
    DuplicateComponent(ComponentId),
    #[error("no component with id {0}")]
    UnknownComponent(ComponentId),
    #[error("ensemble `{ensemble}` is malformed: {reason}")]
    InvalidEnsemble { ensemble: String, reason: String },
}

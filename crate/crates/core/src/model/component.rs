//! Component types, instances and the population they live in.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::ModelError;

/// Simulation time in whole minutes since the simulation epoch.
pub type Time = i64;

/// Identifier of a component instance, unique across the whole system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A symbolic location, stored as plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Semantic type of a component field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Number,
    Boolean,
    Time,
    Position,
    Id,
    Ids,
}

/// A field value. `Ids` is kept sorted ascending so membership tests can bisect.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Time(Time),
    Position(Position),
    Id(ComponentId),
    Ids(Vec<ComponentId>),
}

impl Value {
    pub fn kind(&self) -> FieldKind {
        match self {
            Value::Number(_) => FieldKind::Number,
            Value::Bool(_) => FieldKind::Boolean,
            Value::Time(_) => FieldKind::Time,
            Value::Position(_) => FieldKind::Position,
            Value::Id(_) => FieldKind::Id,
            Value::Ids(_) => FieldKind::Ids,
        }
    }

    /// Builds an `Ids` value, sorting and deduplicating the input.
    pub fn ids(ids: impl IntoIterator<Item = ComponentId>) -> Self {
        let mut v: Vec<ComponentId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Value::Ids(v)
    }

    /// Default value for a field of the given kind.
    pub fn default_for(kind: FieldKind) -> Self {
        match kind {
            FieldKind::Number => Value::Number(0.0),
            FieldKind::Boolean => Value::Bool(false),
            FieldKind::Time => Value::Time(0),
            FieldKind::Position => Value::Position(Position::new(0.0, 0.0)),
            FieldKind::Id => Value::Id(ComponentId(0)),
            FieldKind::Ids => Value::Ids(Vec::new()),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match *self {
            Value::Number(n) => Some(n),
            Value::Time(t) => Some(t as f64),
            Value::Bool(b) => Some(if b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<Time> {
        match *self {
            Value::Time(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_id(&self) -> Option<ComponentId> {
        match *self {
            Value::Id(id) => Some(id),
            _ => None,
        }
    }

    pub fn as_ids(&self) -> Option<&[ComponentId]> {
        match self {
            Value::Ids(ids) => Some(ids),
            _ => None,
        }
    }

    /// Membership test for `Ids` values; false for any other kind.
    pub fn contains(&self, id: ComponentId) -> bool {
        match self {
            Value::Ids(ids) => ids.binary_search(&id).is_ok(),
            _ => false,
        }
    }
}

/// Schema of a component type.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentType {
    name: String,
    fields: Vec<(String, FieldKind)>,
    beyond_control: bool,
}

impl ComponentType {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            fields: Vec::new(),
            beyond_control: false,
        }
    }

    pub fn field(mut self, name: impl Into<String>, kind: FieldKind) -> Self {
        self.fields.push((name.into(), kind));
        self
    }

    /// Marks the type as observed-only: ensemble actions never write its state.
    pub fn beyond_control(mut self) -> Self {
        self.beyond_control = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn fields(&self) -> &[(String, FieldKind)] {
        &self.fields
    }

    pub fn is_beyond_control(&self) -> bool {
        self.beyond_control
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (i, (name, _)) in self.fields.iter().enumerate() {
            if self.fields[..i].iter().any(|(n, _)| n == name) {
                return Err(ModelError::DuplicateField {
                    type_name: self.name.clone(),
                    field: name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Handle to a registered component type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeHandle(pub(crate) usize);

impl TypeHandle {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Registry of component types; immutable once a population is built from it.
#[derive(Debug, Clone, Default)]
pub struct TypeRegistry {
    types: Vec<Arc<ComponentType>>,
}

impl TypeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, schema: ComponentType) -> Result<TypeHandle, ModelError> {
        if self.lookup(schema.name()).is_some() {
            return Err(ModelError::DuplicateType(schema.name.clone()));
        }
        schema.validate()?;
        self.types.push(Arc::new(schema));
        Ok(TypeHandle(self.types.len() - 1))
    }

    pub fn lookup(&self, name: &str) -> Option<TypeHandle> {
        self.types
            .iter()
            .position(|t| t.name() == name)
            .map(TypeHandle)
    }

    pub fn get(&self, handle: TypeHandle) -> &Arc<ComponentType> {
        &self.types[handle.0]
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// A component: an identified record whose fields follow its type's schema.
#[derive(Debug, Clone)]
pub struct ComponentInstance {
    id: ComponentId,
    type_handle: TypeHandle,
    schema: Arc<ComponentType>,
    values: Vec<Value>,
}

impl ComponentInstance {
    pub fn id(&self) -> ComponentId {
        self.id
    }

    pub fn type_handle(&self) -> TypeHandle {
        self.type_handle
    }

    pub fn schema(&self) -> &ComponentType {
        &self.schema
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.schema.field_index(field).map(|i| &self.values[i])
    }

    /// Positional access; `index` comes from [`ComponentType::field_index`].
    pub fn value(&self, index: usize) -> &Value {
        &self.values[index]
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }
}

/// All live components of one simulation, indexed by id and by type.
#[derive(Debug, Clone)]
pub struct Population {
    registry: Arc<TypeRegistry>,
    components: Vec<ComponentInstance>,
    index: HashMap<ComponentId, usize>,
    by_type: Vec<Vec<usize>>,
}

impl Population {
    pub fn new(registry: Arc<TypeRegistry>) -> Self {
        let by_type = vec![Vec::new(); registry.len()];
        Self {
            registry,
            components: Vec::new(),
            index: HashMap::new(),
            by_type,
        }
    }

    pub fn registry(&self) -> &Arc<TypeRegistry> {
        &self.registry
    }

    /// Adds a component. Every schema field must be given exactly once with its declared kind.
    pub fn insert(
        &mut self,
        id: ComponentId,
        type_handle: TypeHandle,
        fields: Vec<(&str, Value)>,
    ) -> Result<(), ModelError> {
        if self.index.contains_key(&id) {
            return Err(ModelError::DuplicateComponent(id));
        }
        let schema = self.registry.get(type_handle).clone();
        let mut values: Vec<Option<Value>> = vec![None; schema.fields().len()];
        for (name, value) in fields {
            let idx = schema
                .field_index(name)
                .ok_or_else(|| ModelError::UnknownField {
                    type_name: schema.name().to_string(),
                    field: name.to_string(),
                })?;
            check_kind(&schema, idx, &value)?;
            if values[idx].replace(normalize(value)).is_some() {
                return Err(ModelError::DuplicateField {
                    type_name: schema.name().to_string(),
                    field: name.to_string(),
                });
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| ModelError::MissingField {
                    type_name: schema.name().to_string(),
                    field: schema.fields()[i].0.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        // keep storage ordered by id so type iteration is ascending
        let pos = self.components.partition_point(|c| c.id < id);
        self.components.insert(
            pos,
            ComponentInstance {
                id,
                type_handle,
                schema,
                values,
            },
        );
        self.reindex();
        Ok(())
    }

    fn reindex(&mut self) {
        self.index.clear();
        for list in &mut self.by_type {
            list.clear();
        }
        for (i, c) in self.components.iter().enumerate() {
            self.index.insert(c.id, i);
            self.by_type[c.type_handle.0].push(i);
        }
    }

    pub fn get(&self, id: ComponentId) -> Option<&ComponentInstance> {
        self.index.get(&id).map(|&i| &self.components[i])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// All components in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &ComponentInstance> {
        self.components.iter()
    }

    /// Components of one type in ascending id order.
    pub fn of_type(&self, handle: TypeHandle) -> impl Iterator<Item = &ComponentInstance> + '_ {
        self.by_type
            .get(handle.0)
            .into_iter()
            .flatten()
            .map(move |&i| &self.components[i])
    }

    pub fn set(&mut self, id: ComponentId, field: &str, value: Value) -> Result<(), ModelError> {
        let i = *self
            .index
            .get(&id)
            .ok_or(ModelError::UnknownComponent(id))?;
        let comp = &mut self.components[i];
        let idx = comp
            .schema
            .field_index(field)
            .ok_or_else(|| ModelError::UnknownField {
                type_name: comp.schema.name().to_string(),
                field: field.to_string(),
            })?;
        check_kind(&comp.schema, idx, &value)?;
        comp.values[idx] = normalize(value);
        Ok(())
    }

    /// Positional write, for hot simulation loops; the kind is still checked.
    pub fn set_at(
        &mut self,
        id: ComponentId,
        index: usize,
        value: Value,
    ) -> Result<(), ModelError> {
        let i = *self
            .index
            .get(&id)
            .ok_or(ModelError::UnknownComponent(id))?;
        let comp = &mut self.components[i];
        if index >= comp.values.len() {
            return Err(ModelError::UnknownField {
                type_name: comp.schema.name().to_string(),
                field: format!("#{index}"),
            });
        }
        check_kind(&comp.schema, index, &value)?;
        comp.values[index] = normalize(value);
        Ok(())
    }
}

fn check_kind(schema: &ComponentType, idx: usize, value: &Value) -> Result<(), ModelError> {
    let (name, kind) = &schema.fields()[idx];
    if value.kind() != *kind {
        return Err(ModelError::FieldKindMismatch {
            type_name: schema.name().to_string(),
            field: name.clone(),
            expected: *kind,
            found: value.kind(),
        });
    }
    Ok(())
}

fn normalize(value: Value) -> Value {
    match value {
        Value::Ids(ids) => Value::ids(ids),
        v => v,
    }
}

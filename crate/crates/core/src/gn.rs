//! The graph-network block: per-edge update, incoming-edge aggregation,
//! per-node update, graph-level aggregation and global update, plus stacks
//! of blocks where only the last one rewrites the global vector.
//!
//! Several graphs are processed at once as a disjoint union ([`GraphBatch`]);
//! the updating functions are shared by every edge, node and graph.

use serde::{Deserialize, Serialize};

use crate::encoder::EncodedGraph;
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpDims, Mode, Session, UpdateFn};
use crate::tensor::{ParamStore, Reduce, Tensor, Var};
use crate::Rng;

/// Numeric graph: node rows, edge rows, edge endpoints and one global vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphState {
    pub nodes: Tensor,
    pub edges: Tensor,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub global: Vec<f64>,
}

impl GraphState {
    pub fn new(
        nodes: Tensor,
        edges: Tensor,
        senders: Vec<usize>,
        receivers: Vec<usize>,
        global: Vec<f64>,
    ) -> Result<Self> {
        let n = nodes.rows();
        let m = edges.rows();
        if nodes.shape().len() != 2 || edges.shape().len() != 2 {
            return Err(Error::shape(
                "GraphState::new",
                "node and edge features must be matrices",
            ));
        }
        if senders.len() != m || receivers.len() != m {
            return Err(Error::shape(
                "GraphState::new",
                format!(
                    "{m} edges but {} senders / {} receivers",
                    senders.len(),
                    receivers.len()
                ),
            ));
        }
        if let Some(&bad) = senders.iter().chain(&receivers).find(|&&i| i >= n) {
            return Err(Error::shape(
                "GraphState::new",
                format!("edge endpoint {bad} out of range for {n} nodes"),
            ));
        }
        Ok(GraphState {
            nodes,
            edges,
            senders,
            receivers,
            global,
        })
    }

    pub fn from_encoded(g: EncodedGraph, global: Vec<f64>) -> Result<Self> {
        let (senders, receivers) = g.endpoints.into_iter().unzip();
        GraphState::new(g.nodes, g.edges, senders, receivers, global)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.rows()
    }

    pub fn dims(&self) -> GnDims {
        GnDims {
            node: self.nodes.cols(),
            edge: self.edges.cols(),
            global: self.global.len(),
        }
    }

    /// New node `i` is old node `perm[i]`; edges keep their order and have
    /// their endpoints remapped.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![usize::MAX; n];
        if perm.len() != n {
            return Err(Error::shape(
                "permute_nodes",
                "permutation length differs from node count",
            ));
        }
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::shape("permute_nodes", "not a permutation"));
            }
            inverse[old] = new;
        }
        let cols = self.nodes.cols();
        let mut data = Vec::with_capacity(self.nodes.len());
        for &old in perm {
            data.extend_from_slice(self.nodes.row(old));
        }
        GraphState::new(
            Tensor::matrix(n, cols, data)?,
            self.edges.clone(),
            self.senders.iter().map(|&s| inverse[s]).collect(),
            self.receivers.iter().map(|&r| inverse[r]).collect(),
            self.global.clone(),
        )
    }

    /// The same nodes and global vector with no edges.
    pub fn without_edges(&self) -> Self {
        GraphState {
            nodes: self.nodes.clone(),
            edges: Tensor::zeros(vec![0, self.edges.cols()]),
            senders: Vec::new(),
            receivers: Vec::new(),
            global: self.global.clone(),
        }
    }
}

/// Feature widths of a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnDims {
    pub node: usize,
    pub edge: usize,
    pub global: usize,
}

/// Permutation-invariant pooling used for edges into nodes and for the
/// graph-level summaries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
    Max,
}

impl From<Aggregation> for Reduce {
    fn from(a: Aggregation) -> Reduce {
        match a {
            Aggregation::Mean => Reduce::Mean,
            Aggregation::Sum => Reduce::Sum,
            Aggregation::Max => Reduce::Max,
        }
    }
}

/// Disjoint union of several graphs with per-row graph membership.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub nodes: Tensor,
    pub edges: Tensor,
    pub globals: Tensor,
    pub topology: Topology,
}

/// Index structure of a [`GraphBatch`], shared by every block of a stack.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub node_graph: Vec<usize>,
    pub edge_graph: Vec<usize>,
    pub node_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
}

impl Topology {
    pub fn num_graphs(&self) -> usize {
        self.node_offsets.len().saturating_sub(1)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_graph.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_graph.len()
    }
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphState]) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::shape("GraphBatch::new", "no graphs"))?;
        let dims = first.dims();
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut globals = Vec::new();
        let mut topo = Topology {
            node_offsets: vec![0],
            edge_offsets: vec![0],
            ..Topology::default()
        };
        for (gi, g) in graphs.iter().enumerate() {
            if g.dims() != dims {
                return Err(Error::shape(
                    "GraphBatch::new",
                    format!("graph {gi} has dims {:?}, expected {dims:?}", g.dims()),
                ));
            }
            let base = topo.num_nodes();
            topo.senders.extend(g.senders.iter().map(|s| s + base));
            topo.receivers.extend(g.receivers.iter().map(|r| r + base));
            topo.node_graph
                .extend(std::iter::repeat_n(gi, g.num_nodes()));
            topo.edge_graph
                .extend(std::iter::repeat_n(gi, g.num_edges()));
            topo.node_offsets.push(topo.num_nodes());
            topo.edge_offsets.push(topo.num_edges());
            nodes.extend_from_slice(g.nodes.data());
            edges.extend_from_slice(g.edges.data());
            globals.extend_from_slice(&g.global);
        }
        Ok(GraphBatch {
            nodes: Tensor::matrix(topo.num_nodes(), dims.node, nodes)?,
            edges: Tensor::matrix(topo.num_edges(), dims.edge, edges)?,
            globals: Tensor::matrix(graphs.len(), dims.global, globals)?,
            topology: topo,
        })
    }

    /// Places the batch on a session's tape.
    pub fn bind(&self, s: &mut Session<'_>) -> GraphVars {
        GraphVars {
            nodes: s.input(self.nodes.clone()),
            edges: s.input(self.edges.clone()),
            globals: s.input(self.globals.clone()),
        }
    }

    /// Splits tape values back into per-graph states.
    pub fn unbatch(&self, s: &Session<'_>, out: &GraphVars) -> Result<Vec<GraphState>> {
        let topo = &self.topology;
        let nodes = s.value(out.nodes);
        let edges = s.value(out.edges);
        let globals = s.value(out.globals);
        let (nw, ew) = (nodes.cols(), edges.cols());
        (0..topo.num_graphs())
            .map(|g| {
                let (n0, n1) = (topo.node_offsets[g], topo.node_offsets[g + 1]);
                let (e0, e1) = (topo.edge_offsets[g], topo.edge_offsets[g + 1]);
                GraphState::new(
                    Tensor::matrix(n1 - n0, nw, nodes.data()[n0 * nw..n1 * nw].to_vec())?,
                    Tensor::matrix(e1 - e0, ew, edges.data()[e0 * ew..e1 * ew].to_vec())?,
                    topo.senders[e0..e1].iter().map(|i| i - n0).collect(),
                    topo.receivers[e0..e1].iter().map(|i| i - n0).collect(),
                    globals.row(g).to_vec(),
                )
            })
            .collect()
    }
}

/// Node, edge and global features of a batch on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphVars {
    pub nodes: Var,
    pub edges: Var,
    pub globals: Var,
}

/// One GN block. `global_fn` is `None` for the inner blocks of a stack,
/// which leave `u` untouched.
#[derive(Clone, Debug)]
pub struct GnBlock<F = Mlp> {
    pub edge_fn: F,
    pub node_fn: F,
    pub global_fn: Option<F>,
    pub aggregation: Aggregation,
    pub dims: GnDims,
}

impl<F: UpdateFn> GnBlock<F> {
    pub fn new(dims: GnDims, edge_fn: F, node_fn: F, global_fn: Option<F>) -> Result<Self> {
        let check = |name: &str, f: &F, input: usize, output: Option<usize>| -> Result<()> {
            let out_ok = output.is_none_or(|o| o == f.output_width());
            if f.input_width() != input || !out_ok {
                return Err(Error::shape(
                    "GnBlock::new",
                    format!(
                        "{name} maps {} -> {}, block needs {input} -> {}",
                        f.input_width(),
                        f.output_width(),
                        output.map_or("any".to_string(), |o| o.to_string())
                    ),
                ));
            }
            Ok(())
        };
        check(
            "edge function",
            &edge_fn,
            dims.edge + 2 * dims.node + dims.global,
            Some(dims.edge),
        )?;
        check(
            "node function",
            &node_fn,
            dims.node + dims.edge + dims.global,
            Some(dims.node),
        )?;
        if let Some(f) = &global_fn {
            check(
                "global function",
                f,
                dims.edge + dims.node + dims.global,
                None,
            )?;
        }
        Ok(GnBlock {
            edge_fn,
            node_fn,
            global_fn,
            aggregation: Aggregation::Mean,
            dims,
        })
    }

    /// Width of the global vector this block emits.
    pub fn global_output_width(&self) -> usize {
        self.global_fn
            .as_ref()
            .map_or(self.dims.global, UpdateFn::output_width)
    }

    /// `e'_m = f_e([e_m; v_s; v_o; u])` for every edge.
    pub fn edge_update(&self, s: &mut Session<'_>, topo: &Topology, g: &GraphVars) -> Result<Var> {
        let v_s = s.tape.gather_rows(g.nodes, &topo.senders)?;
        let v_o = s.tape.gather_rows(g.nodes, &topo.receivers)?;
        let u = s.tape.gather_rows(g.globals, &topo.edge_graph)?;
        let x = s.tape.concat_cols(&[g.edges, v_s, v_o, u])?;
        self.edge_fn.apply(s, x)
    }

    /// `v'_n = f_v([v_n; agg(incoming e'); u])` for every node.
    pub fn node_update(
        &self,
        s: &mut Session<'_>,
        topo: &Topology,
        g: &GraphVars,
        new_edges: Var,
    ) -> Result<Var> {
        let incoming = aggregate_incoming(s, topo, new_edges, self.aggregation)?;
        let u = s.tape.gather_rows(g.globals, &topo.node_graph)?;
        let x = s.tape.concat_cols(&[g.nodes, incoming, u])?;
        self.node_fn.apply(s, x)
    }

    /// `u' = f_u([mean e'; mean v'; u])` per graph.
    pub fn global_update(
        &self,
        s: &mut Session<'_>,
        topo: &Topology,
        g: &GraphVars,
        new_edges: Var,
        new_nodes: Var,
    ) -> Result<Var> {
        let f = self
            .global_fn
            .as_ref()
            .ok_or_else(|| Error::Config("this block has no global updating function".into()))?;
        let reduce = self.aggregation.into();
        let graphs = topo.num_graphs();
        let e_bar = s
            .tape
            .segment_reduce(new_edges, &topo.edge_graph, graphs, reduce)?;
        let v_bar = s
            .tape
            .segment_reduce(new_nodes, &topo.node_graph, graphs, reduce)?;
        let x = s.tape.concat_cols(&[e_bar, v_bar, g.globals])?;
        f.apply(s, x)
    }

    /// Edge, node, then (if present) global update.
    pub fn forward(
        &self,
        s: &mut Session<'_>,
        topo: &Topology,
        g: &GraphVars,
    ) -> Result<GraphVars> {
        let edges = self.edge_update(s, topo, g)?;
        let nodes = self.node_update(s, topo, g, edges)?;
        let globals = match self.global_fn {
            Some(_) => self.global_update(s, topo, g, edges, nodes)?,
            None => g.globals,
        };
        Ok(GraphVars {
            nodes,
            edges,
            globals,
        })
    }
}

/// Pools updated edge rows into their object (receiver) node; nodes with
/// no incoming edge get the zero vector.
pub fn aggregate_incoming(
    s: &mut Session<'_>,
    topo: &Topology,
    new_edges: Var,
    kind: Aggregation,
) -> Result<Var> {
    s.tape
        .segment_reduce(new_edges, &topo.receivers, topo.num_nodes(), kind.into())
}

/// A non-empty sequence of blocks with unshared parameters. All blocks
/// except the last keep `u` fixed.
#[derive(Clone, Debug)]
pub struct GnStack<F = Mlp> {
    blocks: Vec<GnBlock<F>>,
}

impl<F: UpdateFn> GnStack<F> {
    pub fn new(blocks: Vec<GnBlock<F>>) -> Result<Self> {
        let Some(last) = blocks.last() else {
            return Err(Error::Config("a GN stack needs at least one block".into()));
        };
        if last.global_fn.is_none() {
            return Err(Error::Config(
                "the last GN block must update the global vector".into(),
            ));
        }
        for (i, pair) in blocks.windows(2).enumerate() {
            if pair[0].global_fn.is_some() {
                return Err(Error::Config(format!(
                    "inner GN block {i} must not update the global vector"
                )));
            }
            if pair[0].dims != pair[1].dims {
                return Err(Error::shape(
                    "GnStack::new",
                    format!(
                        "block {i} dims {:?} feed block {} expecting {:?}",
                        pair[0].dims,
                        i + 1,
                        pair[1].dims
                    ),
                ));
            }
        }
        Ok(GnStack { blocks })
    }

    pub fn blocks(&self) -> &[GnBlock<F>] {
        &self.blocks
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn input_dims(&self) -> GnDims {
        self.blocks[0].dims
    }

    pub fn global_output_width(&self) -> usize {
        self.blocks[self.blocks.len() - 1].global_output_width()
    }

    pub fn forward(
        &self,
        s: &mut Session<'_>,
        topo: &Topology,
        g: &GraphVars,
    ) -> Result<GraphVars> {
        let mut cur = *g;
        for b in &self.blocks {
            cur = b.forward(s, topo, &cur)?;
        }
        Ok(cur)
    }
}

impl GnStack<Mlp> {
    /// `depth` blocks of MLP updating functions registered under
    /// `{prefix}.block{i}.{edge,node,global}`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_mlps(
        store: &mut ParamStore,
        prefix: &str,
        dims: GnDims,
        depth: usize,
        hidden: usize,
        global_out: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("stack depth must be at least 1".into()));
        }
        let mut blocks = Vec::with_capacity(depth);
        for i in 0..depth {
            let p = format!("{prefix}.block{i}");
            let edge = Mlp::new(
                store,
                &format!("{p}.edge"),
                MlpDims {
                    input: dims.edge + 2 * dims.node + dims.global,
                    hidden,
                    output: dims.edge,
                },
                dropout,
                rng,
            );
            let node = Mlp::new(
                store,
                &format!("{p}.node"),
                MlpDims {
                    input: dims.node + dims.edge + dims.global,
                    hidden,
                    output: dims.node,
                },
                dropout,
                rng,
            );
            let global = (i + 1 == depth).then(|| {
                Mlp::new(
                    store,
                    &format!("{p}.global"),
                    MlpDims {
                        input: dims.edge + dims.node + dims.global,
                        hidden,
                        output: global_out,
                    },
                    dropout,
                    rng,
                )
            });
            blocks.push(GnBlock::new(dims, edge, node, global)?);
        }
        GnStack::new(blocks)
    }
}

/// Runs one full block on a single graph.
pub fn gn_forward<F: UpdateFn>(
    state: &GraphState,
    block: &GnBlock<F>,
    store: &ParamStore,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<GraphState> {
    run_batch(&[state], store, mode, rng, |s, topo, g| {
        block.forward(s, topo, g)
    })
    .map(one)
}

/// Runs a stack on a single graph.
pub fn stacked_forward<F: UpdateFn>(
    state: &GraphState,
    stack: &GnStack<F>,
    store: &ParamStore,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<GraphState> {
    run_batch(&[state], store, mode, rng, |s, topo, g| {
        stack.forward(s, topo, g)
    })
    .map(one)
}

/// Runs a stack over a batch of graphs in one session.
pub fn stacked_forward_batch<F: UpdateFn>(
    graphs: &[&GraphState],
    stack: &GnStack<F>,
    store: &ParamStore,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Result<Vec<GraphState>> {
    run_batch(graphs, store, mode, rng, |s, topo, g| {
        stack.forward(s, topo, g)
    })
}

fn one(mut v: Vec<GraphState>) -> GraphState {
    v.pop().expect("one graph in, one graph out")
}

fn run_batch(
    graphs: &[&GraphState],
    store: &ParamStore,
    mode: Mode,
    rng: Option<&mut Rng>,
    f: impl FnOnce(&mut Session<'_>, &Topology, &GraphVars) -> Result<GraphVars>,
) -> Result<Vec<GraphState>> {
    let batch = GraphBatch::new(graphs)?;
    let mut s = Session::new(store, mode, rng);
    let vars = batch.bind(&mut s);
    let out = f(&mut s, &batch.topology, &vars)?;
    batch.unbatch(&s, &out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::nn::BlockSum;

    fn stub_block(w: usize, with_global: bool) -> GnBlock<BlockSum> {
        let dims = GnDims {
            node: w,
            edge: w,
            global: w,
        };
        GnBlock::new(
            dims,
            BlockSum {
                width: w,
                blocks: 4,
            },
            BlockSum {
                width: w,
                blocks: 3,
            },
            with_global.then_some(BlockSum {
                width: w,
                blocks: 3,
            }),
        )
        .unwrap()
    }

    fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    fn eval<F: UpdateFn>(g: &GraphState, block: &GnBlock<F>) -> GraphState {
        gn_forward(g, block, &ParamStore::new(), Mode::Eval, None).unwrap()
    }

    #[test]
    fn edge_stub_hand_value() {
        // e=(1,0), v_s=(0,1), v_o=(1,1), u=(2,2)
        let g = GraphState::new(
            m(2, 2, &[0., 1., 1., 1.]),
            m(1, 2, &[1., 0.]),
            vec![0],
            vec![1],
            vec![2., 2.],
        )
        .unwrap();
        let out = eval(&g, &stub_block(2, true));
        assert_eq!(out.edges.data(), &[4., 4.]);
        assert_eq!(out.senders, vec![0]);
        assert_eq!(out.receivers, vec![1]);
    }

    #[test]
    fn incoming_mean_and_empty() {
        let store = ParamStore::new();
        let mut s = Session::eval(&store);
        let topo = Topology {
            receivers: vec![1, 1, 0],
            node_graph: vec![0, 0, 0],
            ..Topology::default()
        };
        let e = s.input(m(3, 2, &[1., 2., 3., 4., 2., 6.]));
        let agg = aggregate_incoming(&mut s, &topo, e, Aggregation::Mean).unwrap();
        assert_eq!(s.value(agg).data(), &[2., 6., 2., 3., 0., 0.]);
    }

    #[test]
    fn isolated_node_stub() {
        let g = GraphState::new(
            m(1, 2, &[1., 1.]),
            Tensor::zeros(vec![0, 2]),
            vec![],
            vec![],
            vec![0., 1.],
        )
        .unwrap();
        let out = eval(&g, &stub_block(2, true));
        assert_eq!(out.nodes.data(), &[1., 2.]);
        // single node, no edges: u' = v' + u
        assert_eq!(out.global, vec![1., 3.]);
    }

    #[test]
    fn empty_graph_passes_u_through_sum_stub() {
        let g = GraphState::new(
            Tensor::zeros(vec![0, 2]),
            Tensor::zeros(vec![0, 2]),
            vec![],
            vec![],
            vec![1., 2.],
        )
        .unwrap();
        let out = eval(&g, &stub_block(2, true));
        assert_eq!(out.global, vec![1., 2.]);
        assert_eq!(out.num_nodes(), 0);
        let stack = GnStack::new(vec![stub_block(2, false), stub_block(2, true)]).unwrap();
        let out = stacked_forward(&g, &stack, &ParamStore::new(), Mode::Eval, None).unwrap();
        assert_eq!(out.global, vec![1., 2.]);
    }

    #[test]
    fn self_loop_reads_node_twice() {
        let g =
            GraphState::new(m(1, 1, &[3.]), m(1, 1, &[1.]), vec![0], vec![0], vec![10.]).unwrap();
        let out = eval(&g, &stub_block(1, true));
        assert_eq!(out.edges.data(), &[17.]);
        assert_eq!(out.nodes.data(), &[30.]);
        assert_eq!(out.global, vec![57.]);
    }

    #[test]
    fn single_block_stack_matches_block() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from_u64(3);
        let dims = GnDims {
            node: 3,
            edge: 2,
            global: 4,
        };
        let stack = GnStack::with_mlps(&mut store, "gn", dims, 1, 5, 1, 0.5, &mut rng).unwrap();
        let g = GraphState::new(
            m(3, 3, &[0.1, 0.2, 0.3, -0.4, 0.5, 0.6, 0.7, -0.8, 0.9]),
            m(2, 2, &[1., -1., 0.5, 0.25]),
            vec![0, 1],
            vec![1, 2],
            vec![0.3, -0.2, 0.1, 0.9],
        )
        .unwrap();
        let a = stacked_forward(&g, &stack, &store, Mode::Eval, None).unwrap();
        let b = gn_forward(&g, &stack.blocks()[0], &store, Mode::Eval, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.global.len(), 1);
    }

    #[test]
    fn batch_equals_individual_runs_in_eval_mode() {
        let mut store = ParamStore::new();
        let mut rng = Rng::seed_from_u64(9);
        let dims = GnDims {
            node: 2,
            edge: 2,
            global: 2,
        };
        let stack = GnStack::with_mlps(&mut store, "gn", dims, 2, 4, 3, 0.5, &mut rng).unwrap();
        let a = GraphState::new(
            m(2, 2, &[1., 0., 0., 1.]),
            m(1, 2, &[0.5, 0.5]),
            vec![1],
            vec![0],
            vec![1., -1.],
        )
        .unwrap();
        let b = GraphState::new(
            m(1, 2, &[0.2, 0.3]),
            Tensor::zeros(vec![0, 2]),
            vec![],
            vec![],
            vec![0., 2.],
        )
        .unwrap();
        let both = stacked_forward_batch(&[&a, &b], &stack, &store, Mode::Eval, None).unwrap();
        assert_eq!(
            both[0],
            stacked_forward(&a, &stack, &store, Mode::Eval, None).unwrap()
        );
        assert_eq!(
            both[1],
            stacked_forward(&b, &stack, &store, Mode::Eval, None).unwrap()
        );
    }

    #[test]
    fn width_errors() {
        let dims = GnDims {
            node: 2,
            edge: 2,
            global: 2,
        };
        assert!(GnBlock::new(
            dims,
            BlockSum {
                width: 2,
                blocks: 3
            },
            BlockSum {
                width: 2,
                blocks: 3
            },
            None
        )
        .is_err());
        assert!(GnStack::new(vec![stub_block(2, true), stub_block(2, true)]).is_err());
        assert!(GnStack::new(vec![stub_block(2, false), stub_block(3, true)]).is_err());
        assert!(GnStack::<BlockSum>::new(vec![]).is_err());
        let g = GraphState::new(
            m(1, 3, &[0.; 3]),
            Tensor::zeros(vec![0, 2]),
            vec![],
            vec![],
            vec![0., 0.],
        )
        .unwrap();
        assert!(gn_forward(
            &g,
            &stub_block(2, true),
            &ParamStore::new(),
            Mode::Eval,
            None
        )
        .is_err());
        assert!(GraphState::new(
            m(1, 2, &[0.; 2]),
            m(1, 2, &[0.; 2]),
            vec![0],
            vec![1],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn permutation_maps_endpoints() {
        let g = GraphState::new(
            m(3, 1, &[1., 2., 3.]),
            m(1, 1, &[0.]),
            vec![0],
            vec![2],
            vec![0.],
        )
        .unwrap();
        let p = g.permute_nodes(&[2, 0, 1]).unwrap();
        assert_eq!(p.nodes.data(), &[3., 1., 2.]);
        assert_eq!((p.senders[0], p.receivers[0]), (1, 0));
        assert!(g.permute_nodes(&[0, 0, 1]).is_err());
    }
}

/** Request/response shapes of the topomol HTTP service. */

export interface HealthResponse {
    status: string;
    version: string;
}

export interface GraphNode {
    z: number;
}

export interface GraphEdge {
    u: number;
    v: number;
    t: string;
}

export interface GraphResponse {
    nodes: GraphNode[];
    edges: GraphEdge[];
    name: string | null;
}

export type FilterPreset = 'atom' | 'hks' | 'degree' | 'ahd';

export interface FingerprintRequest {
    smiles: string[];
    filters?: FilterPreset;
    resolution?: number;
    sigma?: number | null;
}

export interface FingerprintResponse {
    width: number;
    rows: number[][];
}

export type FilterName = 'atomic_number' | 'degree' | 'hks';

export interface DiagramRequest {
    smiles: string;
    filter?: FilterName;
    hks_t?: number;
}

export interface DiagramPoint {
    birth: number;
    death: number;
    dim: number;
    kind: string;
}

export interface DiagramResponse {
    points: DiagramPoint[];
    filter_tag: string;
}

export interface TdlRequest {
    z: number[][];
    fingerprints: number[][];
    tau?: number;
}

export interface TdlGradRequest extends TdlRequest {
    n: number;
    i: number;
}

export interface TaeRequest {
    h: number[][];
    fingerprints: number[][];
}

export interface NtxentRequest {
    z_i: number[][];
    z_j: number[][];
    tau?: number;
}

export interface ScalarResponse {
    value: number;
}

export interface VectorResponse {
    vector: number[];
}

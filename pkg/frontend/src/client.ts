import type {
    DiagramRequest,
    DiagramResponse,
    FingerprintRequest,
    FingerprintResponse,
    GraphResponse,
    HealthResponse,
    NtxentRequest,
    ScalarResponse,
    TaeRequest,
    TdlGradRequest,
    TdlRequest,
    VectorResponse,
} from './types.js';

/** Error raised for non-2xx responses; carries the service's detail string. */
export class TopomolApiError extends Error {
    readonly status: number;
    readonly detail: string;

    constructor(status: number, detail: string) {
        super(`topomol service returned ${status}: ${detail}`);
        this.name = 'TopomolApiError';
        this.status = status;
        this.detail = detail;
    }
}

/** Thin typed client for the topomol HTTP service. */
export class TopomolClient {
    private readonly baseUrl: string;

    constructor(baseUrl: string) {
        this.baseUrl = baseUrl.replace(/\/+$/, '');
    }

    private async request<T>(method: 'GET' | 'POST', path: string, body?: unknown): Promise<T> {
        const res = await fetch(this.baseUrl + path, {
            method,
            headers: { 'content-type': 'application/json' },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const text = await res.text();
        if (!res.ok) {
            let detail = text;
            try {
                const parsed = JSON.parse(text);
                if (typeof parsed?.detail === 'string') detail = parsed.detail;
                else detail = JSON.stringify(parsed.detail ?? parsed);
            } catch {
                // keep the raw body
            }
            throw new TopomolApiError(res.status, detail);
        }
        return JSON.parse(text) as T;
    }

    health(): Promise<HealthResponse> {
        return this.request('GET', '/health');
    }

    /** Parse a SMILES string into its node/edge graph. */
    parse(smiles: string): Promise<GraphResponse> {
        return this.request('POST', '/parse', { smiles });
    }

    /** Topological fingerprints for a batch of molecules. */
    fingerprint(req: FingerprintRequest): Promise<FingerprintResponse> {
        return this.request('POST', '/fingerprint', req);
    }

    /** Extended persistence diagram of one molecule under a node filter. */
    diagram(req: DiagramRequest): Promise<DiagramResponse> {
        return this.request('POST', '/diagram', req);
    }

    /** Distance-ranked contrastive loss of embeddings against fingerprints. */
    lossTdl(req: TdlRequest): Promise<ScalarResponse> {
        return this.request('POST', '/loss/tdl', req);
    }

    /** Closed-form gradient of the dot-product loss variant. */
    lossTdlGrad(req: TdlGradRequest): Promise<VectorResponse> {
        return this.request('POST', '/loss/tdl-grad', req);
    }

    /** Mean squared fingerprint-reconstruction error. */
    lossTae(req: TaeRequest): Promise<ScalarResponse> {
        return this.request('POST', '/loss/tae', req);
    }

    /** NT-Xent contrastive loss over two aligned views. */
    lossNtxent(req: NtxentRequest): Promise<ScalarResponse> {
        return this.request('POST', '/loss/ntxent', req);
    }
}

/**
 * Login session: which token is in use and which roles the server actually
 * grants it. The API has no introspection endpoint, so roles are detected by
 * probing one role-gated endpoint per role and reading the authorization
 * verdict. Controls for undetected roles are not rendered at all; the client
 * never grants itself a permission the server would refuse.
 */

import { ApiError, DevicelabClient } from './api.js';
import type { RoleName } from './types.js';

export interface SessionView {
  client: DevicelabClient;
  roles: RoleName[];
  /** The stage the operator is currently working in. */
  roleContext: RoleName;
}

/** Actions each role context exposes; mirrors the endpoint role gates. */
const ACTIONS_BY_ROLE: Record<RoleName, string[]> = {
  crowd_worker: ['open-draft', 'add-claim', 'attach-evidence', 'submit-draft', 'define-feature'],
  admin: ['create-template', 'open-merge-session', 'decide-group', 'finalize-session'],
  student: ['compare-products', 'view-prompts', 'submit-ranking', 'view-consensus'],
};

export function visibleActions(roles: RoleName[], context: RoleName): string[] {
  return roles.includes(context) ? ACTIONS_BY_ROLE[context] : [];
}

async function probe(call: () => Promise<unknown>, allowCodes: string[] = []): Promise<boolean> {
  try {
    await call();
    return true;
  } catch (error) {
    if (error instanceof ApiError) {
      if (allowCodes.includes(error.code)) {
        return true; // past the role gate, failed on something later
      }
      if (error.status === 401) {
        throw error; // bad token is a login failure, not a missing role
      }
      if (error.status === 403) {
        return false;
      }
    }
    throw error;
  }
}

export async function detectRoles(client: DevicelabClient): Promise<RoleName[]> {
  const roles: RoleName[] = [];
  if (await probe(() => client.listDrafts())) {
    roles.push('crowd_worker');
  }
  if (await probe(() => client.exportDocument())) {
    roles.push('admin');
  }
  // Students pass the role gate and then hit no-rankings on an empty poll.
  if (await probe(() => client.consensus('login-probe'), ['no-rankings'])) {
    roles.push('student');
  }
  return roles;
}

export async function login(baseUrl: string, token: string): Promise<SessionView> {
  const client = new DevicelabClient(baseUrl, token);
  const roles = await detectRoles(client);
  if (roles.length === 0) {
    throw new ApiError(403, 'authorization', 'token holds no usable role');
  }
  const first = roles[0] as RoleName;
  return { client, roles, roleContext: first };
}
